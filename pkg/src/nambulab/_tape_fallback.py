"""Pure numpy tape backend. Mirrors the Cython kernel semantics exactly:
same opcodes, same domain-error codes (written into ``err`` as
``[code, op_index, batch_index]``)."""

from __future__ import annotations

import numpy as np

_OP_CONST = 0
_OP_VAR = 1
_OP_ADD = 2
_OP_SUB = 3
_OP_MUL = 4
_OP_DIV = 5
_OP_NEG = 6
_OP_SIN = 7
_OP_COS = 8
_OP_EXP = 9
_OP_LOG = 10
_OP_SQRT = 11
_OP_IPOW = 12
_OP_POWC = 13
_OP_POW = 14


def _fail(err, code, op, where):
    err[0] = code
    err[1] = op
    err[2] = int(where)


def _ipow(v, k):
    if k == 0:
        return np.ones_like(v)
    r = None
    base = v
    kk = abs(k)
    while kk:
        if kk & 1:
            r = base.copy() if r is None else r * base
        kk >>= 1
        if kk:
            base = base * base
    return 1.0 / r if k < 0 else r


def tape_values(code, arg1, arg2, consts, points, out, err):
    B = points.shape[0]
    reg = np.empty((len(code), B))
    for i in range(len(code)):
        op = code[i]
        if op == _OP_CONST:
            reg[i] = consts[i]
        elif op == _OP_VAR:
            reg[i] = points[:, arg1[i]]
        elif op == _OP_ADD:
            np.add(reg[arg1[i]], reg[arg2[i]], out=reg[i])
        elif op == _OP_SUB:
            np.subtract(reg[arg1[i]], reg[arg2[i]], out=reg[i])
        elif op == _OP_MUL:
            np.multiply(reg[arg1[i]], reg[arg2[i]], out=reg[i])
        elif op == _OP_DIV:
            b = reg[arg2[i]]
            zero = b == 0.0
            if zero.any():
                return _fail(err, 1, i, np.argmax(zero))
            np.divide(reg[arg1[i]], b, out=reg[i])
        elif op == _OP_NEG:
            np.negative(reg[arg1[i]], out=reg[i])
        elif op == _OP_SIN:
            np.sin(reg[arg1[i]], out=reg[i])
        elif op == _OP_COS:
            np.cos(reg[arg1[i]], out=reg[i])
        elif op == _OP_EXP:
            np.exp(reg[arg1[i]], out=reg[i])
        elif op == _OP_LOG:
            a = reg[arg1[i]]
            bad = a <= 0.0
            if bad.any():
                return _fail(err, 2, i, np.argmax(bad))
            np.log(a, out=reg[i])
        elif op == _OP_SQRT:
            a = reg[arg1[i]]
            bad = a < 0.0
            if bad.any():
                return _fail(err, 3, i, np.argmax(bad))
            np.sqrt(a, out=reg[i])
        elif op == _OP_IPOW:
            k = int(arg2[i])
            a = reg[arg1[i]]
            if k < 0:
                zero = a == 0.0
                if zero.any():
                    return _fail(err, 4, i, np.argmax(zero))
            reg[i] = _ipow(a, k)
        elif op == _OP_POWC:
            a = reg[arg1[i]]
            r = consts[i]
            bad = (a < 0.0) | ((a == 0.0) & (r < 0.0))
            if bad.any():
                return _fail(err, 4, i, np.argmax(bad))
            reg[i] = np.power(a, r)
        elif op == _OP_POW:
            a = reg[arg1[i]]
            bad = a <= 0.0
            if bad.any():
                return _fail(err, 4, i, np.argmax(bad))
            reg[i] = np.power(a, reg[arg2[i]])
    out[:] = reg[-1]


def tape_values_and_gradients(code, arg1, arg2, consts, points, out, grad, err):
    B = points.shape[0]
    nv = points.shape[1]
    reg = np.empty((len(code), B))
    dreg = np.zeros((len(code), B, nv))
    for i in range(len(code)):
        op = code[i]
        if op == _OP_CONST:
            reg[i] = consts[i]
        elif op == _OP_VAR:
            reg[i] = points[:, arg1[i]]
            dreg[i, :, arg1[i]] = 1.0
        elif op == _OP_ADD:
            a, b = arg1[i], arg2[i]
            reg[i] = reg[a] + reg[b]
            dreg[i] = dreg[a] + dreg[b]
        elif op == _OP_SUB:
            a, b = arg1[i], arg2[i]
            reg[i] = reg[a] - reg[b]
            dreg[i] = dreg[a] - dreg[b]
        elif op == _OP_MUL:
            a, b = arg1[i], arg2[i]
            reg[i] = reg[a] * reg[b]
            dreg[i] = reg[a][:, None] * dreg[b] + reg[b][:, None] * dreg[a]
        elif op == _OP_DIV:
            a, b = arg1[i], arg2[i]
            vb = reg[b]
            zero = vb == 0.0
            if zero.any():
                return _fail(err, 1, i, np.argmax(zero))
            q = reg[a] / vb
            reg[i] = q
            dreg[i] = (dreg[a] - q[:, None] * dreg[b]) / vb[:, None]
        elif op == _OP_NEG:
            a = arg1[i]
            reg[i] = -reg[a]
            dreg[i] = -dreg[a]
        elif op == _OP_SIN:
            a = arg1[i]
            reg[i] = np.sin(reg[a])
            dreg[i] = np.cos(reg[a])[:, None] * dreg[a]
        elif op == _OP_COS:
            a = arg1[i]
            reg[i] = np.cos(reg[a])
            dreg[i] = -np.sin(reg[a])[:, None] * dreg[a]
        elif op == _OP_EXP:
            a = arg1[i]
            e = np.exp(reg[a])
            reg[i] = e
            dreg[i] = e[:, None] * dreg[a]
        elif op == _OP_LOG:
            a = arg1[i]
            va = reg[a]
            bad = va <= 0.0
            if bad.any():
                return _fail(err, 2, i, np.argmax(bad))
            reg[i] = np.log(va)
            dreg[i] = dreg[a] / va[:, None]
        elif op == _OP_SQRT:
            a = arg1[i]
            va = reg[a]
            bad = va < 0.0
            if bad.any():
                return _fail(err, 3, i, np.argmax(bad))
            s = np.sqrt(va)
            reg[i] = s
            with np.errstate(divide="ignore", invalid="ignore"):
                dreg[i] = dreg[a] / (2.0 * s[:, None])
        elif op == _OP_IPOW:
            a = arg1[i]
            k = int(arg2[i])
            va = reg[a]
            if k < 0:
                zero = va == 0.0
                if zero.any():
                    return _fail(err, 4, i, np.argmax(zero))
            if k == 0:
                reg[i] = 1.0
                dreg[i] = 0.0
            else:
                reg[i] = _ipow(va, k)
                dreg[i] = (k * _ipow(va, k - 1))[:, None] * dreg[a]
        elif op == _OP_POWC:
            a = arg1[i]
            r = consts[i]
            va = reg[a]
            bad = va <= 0.0
            if bad.any():
                return _fail(err, 4, i, np.argmax(bad))
            reg[i] = np.power(va, r)
            dreg[i] = (r * np.power(va, r - 1.0))[:, None] * dreg[a]
        elif op == _OP_POW:
            a, b = arg1[i], arg2[i]
            va = reg[a]
            bad = va <= 0.0
            if bad.any():
                return _fail(err, 4, i, np.argmax(bad))
            v = np.power(va, reg[b])
            reg[i] = v
            dreg[i] = v[:, None] * (dreg[b] * np.log(va)[:, None]
                                    + reg[b][:, None] * dreg[a] / va[:, None])
    out[:] = reg[-1]
    grad[:] = dreg[-1]
