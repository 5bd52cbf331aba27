"""Independent pure-Python reference model (lists and math only, no numpy).

Used as an oracle for the tensor implementation; it shares no code with it.
"""

import math

BOS, EOS = 2, 3


def _mv(m, v):
    return [sum(m[i][j] * v[j] for j in range(len(v))) for i in range(len(m))]


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def gru(x, h, w):
    """w: dict with W_z.. U_h.. b_z.. as nested lists."""
    n = len(h)
    wz, wr, wh = _mv(w["W_z"], x), _mv(w["W_r"], x), _mv(w["W_h"], x)
    uz, ur = _mv(w["U_z"], h), _mv(w["U_r"], h)
    z = [_sig(wz[i] + uz[i] + w["b_z"][i]) for i in range(n)]
    r = [_sig(wr[i] + ur[i] + w["b_r"][i]) for i in range(n)]
    rh = [r[i] * h[i] for i in range(n)]
    uh = _mv(w["U_h"], rh)
    cand = [math.tanh(wh[i] + uh[i] + w["b_h"][i]) for i in range(n)]
    return [(1 - z[i]) * h[i] + z[i] * cand[i] for i in range(n)]


def _gru_weights(arrays, prefix):
    return {k: arrays[f"{prefix}.{k}"] for k in
            ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")}


def _softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def loss(arrays, src, tgt):
    """Teacher-forced mean NLL; ``arrays`` maps parameter names to nested lists."""
    hidden = len(arrays["bridge"])
    enc_f = _gru_weights(arrays, "encoder_fwd")
    enc_b = _gru_weights(arrays, "encoder_bwd")
    dec = _gru_weights(arrays, "decoder")
    emb = [arrays["src_embed"][i] for i in src]

    fwd, h = [], [0.0] * hidden
    for x in emb:
        h = gru(x, h, enc_f)
        fwd.append(h)
    bwd, h = [None] * len(emb), [0.0] * hidden
    for j in reversed(range(len(emb))):
        h = gru(emb[j], h, enc_b)
        bwd[j] = h
    ann = [fwd[j] + bwd[j] for j in range(len(emb))]

    s = [math.tanh(v) for v in _mv(arrays["bridge"], bwd[0])]
    gold = [BOS] + list(tgt) + [EOS]
    total = 0.0
    for t in range(1, len(gold)):
        q = _mv(arrays["attn_W"], s)
        scores = []
        for hj in ann:
            k = _mv(arrays["attn_U"], hj)
            scores.append(sum(v * math.tanh(q[i] + k[i]) for i, v in enumerate(arrays["attn_v"])))
        a = _softmax(scores)
        c = [sum(a[j] * ann[j][d] for j in range(len(ann))) for d in range(2 * hidden)]
        e = arrays["tgt_embed"][gold[t - 1]]
        s = gru(e + c, s, dec)
        logits = _mv(arrays["out_proj"], s + c + e)
        logits = [logits[i] + arrays["out_bias"][i] for i in range(len(logits))]
        p = _softmax(logits)
        total += -math.log(max(p[gold[t]], 1e-12))
    return total / (len(gold) - 1)
