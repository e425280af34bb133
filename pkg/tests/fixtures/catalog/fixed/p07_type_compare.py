def is_int(value):
    return isinstance(value, int)
