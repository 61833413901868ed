"""Shared vocabulary conventions.

Reserved ids are fixed so that corpora, models, and metrics agree without
passing symbol tables around: PAD=0 in both vocabularies, BOS=1 and EOS=2 in
the logical-form (output) vocabulary.
"""

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"

INPUT_RESERVED = [PAD_TOKEN]
OUTPUT_RESERVED = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN]
