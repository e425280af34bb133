from __future__ import annotations

import os
import subprocess
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
CATALOG = FIXTURES / "catalog"

BASE_EPOCH = 1_500_000_000  # 2017-07-14, arbitrary


class GitFixture:
    """Builds a repository commit by commit with controlled authors and dates."""

    def __init__(self, path: Path, branch: str = "master"):
        self.path = path
        self.branch = branch
        path.mkdir(parents=True, exist_ok=True)
        self.git("init", "-q", "-b", branch)
        self.git("config", "user.name", "fixture")
        self.git("config", "user.email", "fixture@example.com")
        self.git("config", "commit.gpgsign", "false")

    def git(self, *args: str, env: dict | None = None) -> str:
        full_env = dict(os.environ, GIT_CONFIG_NOSYSTEM="1", HOME=str(self.path))
        full_env.update(env or {})
        proc = subprocess.run(
            ["git", "-C", str(self.path), *args],
            capture_output=True,
            text=True,
            env=full_env,
            check=True,
        )
        return proc.stdout

    def commit(
        self,
        files: dict[str, str | None],
        author: str = "alice",
        epoch: int = BASE_EPOCH,
        message: str = "change",
    ) -> str:
        """Write (or delete, for None) files and commit them; returns the sha."""
        for name, content in files.items():
            target = self.path / name
            if content is None:
                self.git("rm", "-q", name)
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content)
            self.git("add", name)
        date = f"@{epoch} +0000"
        env = {
            "GIT_AUTHOR_NAME": author,
            "GIT_AUTHOR_EMAIL": f"{author}@example.com",
            "GIT_AUTHOR_DATE": date,
            "GIT_COMMITTER_NAME": author,
            "GIT_COMMITTER_EMAIL": f"{author}@example.com",
            "GIT_COMMITTER_DATE": date,
        }
        self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.git("rev-parse", "HEAD").strip()


@pytest.fixture
def git_fixture(tmp_path):
    return GitFixture(tmp_path / "repo")


def benign_module(n: int) -> str:
    """Pattern-free Python with ``n`` small functions."""
    parts = ['"""Fixture module."""\n']
    for i in range(n):
        parts.append(f"\n\ndef f{i}(x):\n    # helper {i}\n    return x + {i}\n")
    return "".join(parts)


INJECTIONS = [
    "\n\ndef keys_loop(d):\n    for k in d.keys():\n        pass\n",
    "\n\ndef concat(s):\n    return 'a' + 'b' + s\n",
    "\n\ndef resort(xs):\n    xs = sorted(xs)\n    return xs\n",
    "\n\ndef double(x):\n    return x * 2\n",
    "\n\ndef is_str(v):\n    return type(v) == str\n",
]


def build_labeled_history(fx: GitFixture) -> tuple[list[str], set[tuple[str, str]]]:
    """Twenty commits over three files; five of them introduce a pattern.

    Returns (shas, expected defective (sha, file) tuples).
    """
    files = {"pkg/a.py": benign_module(1), "pkg/b.py": benign_module(1), "pkg/c.py": benign_module(1)}
    owners = ["alice", "bob", "carol"]
    inject_at = {3: 0, 7: 1, 11: 2, 14: 3, 18: 4}
    shas, expected = [], set()
    epoch = BASE_EPOCH
    for i in range(20):
        epoch += 3600 * (i + 1)
        if i == 0:
            shas.append(fx.commit(dict(files), owners[0], epoch, "initial"))
            continue
        name = sorted(files)[i % 3]
        if i in inject_at:
            files[name] = files[name] + INJECTIONS[inject_at[i]]
        elif i == 16:
            # fix: remove the string concatenation injected at commit 7
            files[name] = files[name].replace("'a' + 'b' + s", "'ab{}'.format(s)")
        elif i % 5 == 0:
            files[name] = files[name].replace("# helper 0", f"# helper 0, revised {i}")
        else:
            files[name] = files[name] + f"\n\ndef g{i}(x):\n    return x - {i}\n"
        sha = fx.commit({name: files[name]}, owners[i % 3], epoch, f"commit {i}")
        shas.append(sha)
        if i in inject_at:
            expected.add((sha, name))
    return shas, expected


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
