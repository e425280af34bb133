def slightly_slower(asequence, adict):
    for x in asequence:
        adict[x] = hex(x)
