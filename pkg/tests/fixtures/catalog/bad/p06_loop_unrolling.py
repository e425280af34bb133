def do(i):
    return i


def use_for():
    for i in range(1000):
        do(i)
