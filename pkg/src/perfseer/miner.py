"""Mine a git branch into per-(commit, file) records with injection labels."""

from __future__ import annotations

import ast
import logging
import os
import subprocess
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .dataset import CLEAN, DEFECTIVE, CommitFileRecord, Dataset
from .errors import BranchNotFound, FileNotInCommit, PerfseerError, RepoNotFound
from .patterns import PY3, count_by_rule, resolve_rules, scan_source

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0
PYTHON_SUFFIXES = (".py", ".pyw")


@dataclass(frozen=True)
class CommitMeta:
    commit_id: str
    parent_id: str | None
    owner: str
    timestamp: datetime

    @property
    def epoch(self) -> int:
        return int(self.timestamp.timestamp())


@dataclass(frozen=True)
class FileChange:
    path: str
    status: str  # git raw status letter: A, M, D, T
    added: int
    removed: int


class GitRepo:
    """Read-only access to a repository through the git command line."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        if not self.path.is_dir():
            raise RepoNotFound(f"no such directory: {self.path}")
        try:
            self._git("rev-parse", "--git-dir")
        except PerfseerError:
            raise RepoNotFound(f"not a git repository: {self.path}") from None

    def _git(self, *args: str, check: bool = True) -> bytes:
        env = dict(os.environ, GIT_CONFIG_NOSYSTEM="1", LC_ALL="C")
        proc = subprocess.run(
            ["git", "-C", str(self.path), *args],
            capture_output=True,
            env=env,
        )
        if check and proc.returncode != 0:
            raise PerfseerError(
                f"git {' '.join(args)} failed: {proc.stderr.decode(errors='replace').strip()}"
            )
        return proc.stdout

    def has_commits(self) -> bool:
        return bool(self._git("for-each-ref", "--count=1", "refs/").strip()) or bool(
            self._git("rev-parse", "--verify", "-q", "HEAD", check=False).strip()
        )

    def resolve(self, branch: str) -> str | None:
        out = self._git("rev-parse", "--verify", "-q", f"{branch}^{{commit}}", check=False)
        return out.decode().strip() or None

    def read_blob(self, rev: str, path: str) -> bytes | None:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "cat-file", "blob", f"{rev}:{path}"],
            capture_output=True,
        )
        return proc.stdout if proc.returncode == 0 else None

    def changes(self, commit: CommitMeta) -> list[FileChange]:
        """Files touched by ``commit`` relative to its first parent.

        Renames are disabled so a move shows up as a deletion plus a creation.
        """
        common = ["diff-tree", "-r", "--no-renames", "--no-commit-id", "--raw", "--numstat", "-z"]
        if commit.parent_id is None:
            out = self._git(*common, "--root", commit.commit_id)
        else:
            out = self._git(*common, commit.parent_id, commit.commit_id)
        tokens = out.decode("utf-8", errors="surrogateescape").split("\0")
        statuses: dict[str, str] = {}
        stats: dict[str, tuple[int, int]] = {}
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if not tok:
                i += 1
                continue
            if tok.startswith(":"):
                statuses[tokens[i + 1]] = tok.split()[-1][0]
                i += 2
                continue
            added, removed, path = tok.split("\t", 2)
            # binary files report "-"
            stats[path] = (
                int(added) if added != "-" else 0,
                int(removed) if removed != "-" else 0,
            )
            i += 1
        return [
            FileChange(path, statuses.get(path, "M"), *stats.get(path, (0, 0)))
            for path in sorted(set(statuses) | set(stats))
        ]


def enumerate_commits(repo_path: str | os.PathLike, branch: str = "master") -> list[CommitMeta]:
    """First-parent history of ``branch``, oldest first.

    An empty repository yields an empty list.
    """
    repo = repo_path if isinstance(repo_path, GitRepo) else GitRepo(repo_path)
    return _enumerate(repo, branch)


def _enumerate(repo: GitRepo, branch: str) -> list[CommitMeta]:
    if not repo.has_commits():
        return []
    if repo.resolve(branch) is None:
        raise BranchNotFound(f"branch not found: {branch}")
    out = repo._git(
        "log", "--first-parent", "--reverse", "--format=%H%x00%P%x00%an <%ae>%x00%at%x00", branch
    )
    fields = out.decode("utf-8", errors="replace").split("\0")
    commits = []
    for i in range(0, len(fields) - 1, 4):
        sha, parents, owner, ts = (f.strip() for f in fields[i : i + 4])
        parent = parents.split()[0] if parents else None
        commits.append(
            CommitMeta(sha, parent, owner, datetime.fromtimestamp(int(ts), tz=timezone.utc))
        )
    return commits


def count_lines(text: str, path: str = "") -> tuple[int, int]:
    """(sloc, comment_lines) for a file's text.

    A comment line starts with ``#`` after leading blanks; in Python files the
    lines spanned by docstrings count as comment lines too.
    """
    lines = text.splitlines()
    comment = set()
    for n, line in enumerate(lines, start=1):
        if line.lstrip().startswith("#"):
            comment.add(n)
    if path.endswith(PYTHON_SUFFIXES):
        comment |= _docstring_lines(text)
    blank = {n for n, line in enumerate(lines, start=1) if not line.strip()}
    comment -= blank
    sloc = len(lines) - len(blank) - len(comment)
    return sloc, len(comment)


def _docstring_lines(text: str) -> set[int]:
    try:
        module = ast.parse(text)
    except (SyntaxError, ValueError):
        return set()
    lines: set[int] = set()
    for node in ast.walk(module):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            body = node.body
            if (
                body
                and isinstance(body[0], ast.Expr)
                and isinstance(body[0].value, ast.Constant)
                and isinstance(body[0].value.value, str)
            ):
                doc = body[0]
                lines.update(range(doc.lineno, doc.end_lineno + 1))
    return lines


def _decode(blob: bytes | None) -> str:
    return "" if blob is None else blob.decode("utf-8", errors="replace")


def _finding_counts(text: str, path: str, rules, dialect: str) -> Counter:
    if not text:
        return Counter()
    return count_by_rule(scan_source(text, rules, dialect, path))


def is_injection(before: Counter, after: Counter) -> bool:
    """True when some rule has strictly more findings after the change."""
    return any(after[rule] > before[rule] for rule in after)


def label_change(
    repo: GitRepo,
    commit: CommitMeta,
    path: str,
    rules=None,
    dialect: str = PY3,
) -> str:
    if not path.endswith(PYTHON_SUFFIXES):
        return CLEAN
    rules = resolve_rules(rules)
    after_text = _decode(repo.read_blob(commit.commit_id, path))
    before_text = (
        "" if commit.parent_id is None else _decode(repo.read_blob(commit.parent_id, path))
    )
    try:
        after = _finding_counts(after_text, path, rules, dialect)
        before = _finding_counts(before_text, path, rules, dialect)
    except SyntaxError as exc:
        log.warning("skipping %s at %s: %s", path, commit.commit_id[:10], exc)
        return CLEAN
    return DEFECTIVE if is_injection(before, after) else CLEAN


class _History:
    """Running state of the branch walk: file creation and owner first-commit times."""

    def __init__(self):
        self.created: dict[str, int] = {}
        self.first_commit: dict[str, int] = {}
        self.previous_epoch: int | None = None


def _record(
    repo: GitRepo, commit: CommitMeta, change: FileChange, history: _History, prev_epoch
) -> CommitFileRecord:
    epoch = commit.epoch
    created = history.created.get(change.path, epoch)
    first = history.first_commit.get(commit.owner, epoch)
    if change.status == "D":
        sloc, comments = 0, 0
    else:
        sloc, comments = count_lines(_decode(repo.read_blob(commit.commit_id, change.path)), change.path)
    # clock skew between commits is clamped so attributes stay non-negative
    return CommitFileRecord(
        commit_id=commit.commit_id,
        file_name=change.path,
        owner=commit.owner,
        lines_added=change.added,
        lines_removed=change.removed,
        file_age_days=max(epoch - created, 0) / SECONDS_PER_DAY,
        sloc=sloc,
        comment_lines=comments,
        maturity_days=max(epoch - first, 0) / SECONDS_PER_DAY,
        time_since_last_commit_hours=(
            0.0 if prev_epoch is None else max(epoch - prev_epoch, 0) / SECONDS_PER_HOUR
        ),
    )


def _walk(repo: GitRepo, commits: Iterable[CommitMeta]):
    """Yield (commit, change, record) in history order, keeping running state."""
    history = _History()
    prev_epoch = None
    for commit in commits:
        history.first_commit.setdefault(commit.owner, commit.epoch)
        changes = repo.changes(commit)
        for change in changes:
            if change.status == "A" or change.path not in history.created:
                history.created[change.path] = commit.epoch
        for change in changes:
            yield commit, change, _record(repo, commit, change, history, prev_epoch)
        for change in changes:
            if change.status == "D":
                history.created.pop(change.path, None)
        prev_epoch = commit.epoch


def extract_record(
    commit: CommitMeta, file_name: str, repo_path: str | os.PathLike, branch: str = "master"
) -> CommitFileRecord:
    """Unlabeled record for one file of one commit on ``branch``."""
    repo = GitRepo(repo_path)
    commits = _enumerate(repo, branch)
    for c, change, record in _walk(repo, commits):
        if c.commit_id == commit.commit_id and change.path == file_name:
            return record
        if c.commit_id == commit.commit_id and change.path > file_name:
            break
    raise FileNotInCommit(f"{file_name} not modified in {commit.commit_id}")


def label_injections(
    repo_path: str | os.PathLike, branch: str = "master", rules=None, dialect: str = PY3
) -> dict[tuple[str, str], str]:
    repo = GitRepo(repo_path)
    labels = {}
    for commit in _enumerate(repo, branch):
        for change in repo.changes(commit):
            labels[(commit.commit_id, change.path)] = label_change(
                repo, commit, change.path, rules, dialect
            )
    return labels


def mine(
    repo_path: str | os.PathLike, branch: str = "master", rules=None, dialect: str = PY3
) -> Dataset:
    """Build the labeled dataset: one record per (commit, modified file).

    Records are ordered by commit position on the branch, then file name.
    """
    repo = GitRepo(repo_path)
    rules = resolve_rules(rules)
    commits = _enumerate(repo, branch)
    records = [
        record.replace(label=label_change(repo, commit, change.path, rules, dialect))
        for commit, change, record in _walk(repo, commits)
    ]
    provenance = {
        "source": {
            "repo": str(Path(repo_path).resolve().name),
            "branch": branch,
            "head": commits[-1].commit_id if commits else None,
            "commits": len(commits),
        },
        "rules": sorted(rules, key=lambda r: int(r[1:])),
        "dialect": dialect,
        "steps": ["mine"],
    }
    return Dataset(records, provenance=provenance)
