""" Runnable demonstrations; each module works with `python -m localtimes.examples.<name>`. """
