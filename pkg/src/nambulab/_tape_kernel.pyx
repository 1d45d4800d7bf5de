# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython tape backend: batched evaluation and forward-mode gradients.

Same opcode set and error codes as ``_tape_fallback``; this is the hot-loop
twin used by the ODE integrators. Errors are written into ``err`` as
``[code, op_index, batch_index]`` and raised by the wrapper in ``tape.py``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, sqrt, pow

cnp.import_array()

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_NEG = 6
DEF OP_SIN = 7
DEF OP_COS = 8
DEF OP_EXP = 9
DEF OP_LOG = 10
DEF OP_SQRT = 11
DEF OP_IPOW = 12
DEF OP_POWC = 13
DEF OP_POW = 14

DEF MAXVARS = 8


cdef inline double _ipow(double v, long k) nogil:
    cdef double r = 1.0
    cdef double base = v
    cdef long kk = k if k >= 0 else -k
    while kk:
        if kk & 1:
            r *= base
        kk >>= 1
        if kk:
            base *= base
    if k < 0:
        return 1.0 / r
    return r


def tape_values(long[::1] code, long[::1] arg1, long[::1] arg2,
                double[::1] consts, double[:, ::1] points,
                double[::1] out, long[::1] err):
    cdef Py_ssize_t K = code.shape[0]
    cdef Py_ssize_t B = points.shape[0]
    cdef Py_ssize_t b, i
    cdef long op
    cdef double a, v
    cdef double[::1] reg = np.empty(K, dtype=np.float64)

    with nogil:
        for b in range(B):
            for i in range(K):
                op = code[i]
                if op == OP_CONST:
                    reg[i] = consts[i]
                elif op == OP_VAR:
                    reg[i] = points[b, arg1[i]]
                elif op == OP_ADD:
                    reg[i] = reg[arg1[i]] + reg[arg2[i]]
                elif op == OP_SUB:
                    reg[i] = reg[arg1[i]] - reg[arg2[i]]
                elif op == OP_MUL:
                    reg[i] = reg[arg1[i]] * reg[arg2[i]]
                elif op == OP_DIV:
                    v = reg[arg2[i]]
                    if v == 0.0:
                        err[0] = 1; err[1] = i; err[2] = b
                        break
                    reg[i] = reg[arg1[i]] / v
                elif op == OP_NEG:
                    reg[i] = -reg[arg1[i]]
                elif op == OP_SIN:
                    reg[i] = sin(reg[arg1[i]])
                elif op == OP_COS:
                    reg[i] = cos(reg[arg1[i]])
                elif op == OP_EXP:
                    reg[i] = exp(reg[arg1[i]])
                elif op == OP_LOG:
                    a = reg[arg1[i]]
                    if a <= 0.0:
                        err[0] = 2; err[1] = i; err[2] = b
                        break
                    reg[i] = log(a)
                elif op == OP_SQRT:
                    a = reg[arg1[i]]
                    if a < 0.0:
                        err[0] = 3; err[1] = i; err[2] = b
                        break
                    reg[i] = sqrt(a)
                elif op == OP_IPOW:
                    a = reg[arg1[i]]
                    if arg2[i] < 0 and a == 0.0:
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    reg[i] = _ipow(a, arg2[i])
                elif op == OP_POWC:
                    a = reg[arg1[i]]
                    if a < 0.0 or (a == 0.0 and consts[i] < 0.0):
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    reg[i] = pow(a, consts[i])
                elif op == OP_POW:
                    a = reg[arg1[i]]
                    if a <= 0.0:
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    reg[i] = pow(a, reg[arg2[i]])
            if err[0] != 0:
                break
            out[b] = reg[K - 1]


def tape_values_and_gradients(long[::1] code, long[::1] arg1, long[::1] arg2,
                              double[::1] consts, double[:, ::1] points,
                              double[::1] out, double[:, ::1] grad,
                              long[::1] err):
    cdef Py_ssize_t K = code.shape[0]
    cdef Py_ssize_t B = points.shape[0]
    cdef Py_ssize_t NV = points.shape[1]
    cdef Py_ssize_t b, i, m
    cdef long op, ia, ib, k
    cdef double a, v, q, c, s
    cdef double[::1] reg = np.empty(K, dtype=np.float64)
    cdef double[:, ::1] dreg = np.empty((K, MAXVARS), dtype=np.float64)

    if NV > MAXVARS:
        raise ValueError("too many coordinate columns for the compiled kernel")

    with nogil:
        for b in range(B):
            for i in range(K):
                op = code[i]
                ia = arg1[i]
                ib = arg2[i]
                if op == OP_CONST:
                    reg[i] = consts[i]
                    for m in range(NV):
                        dreg[i, m] = 0.0
                elif op == OP_VAR:
                    reg[i] = points[b, ia]
                    for m in range(NV):
                        dreg[i, m] = 0.0
                    dreg[i, ia] = 1.0
                elif op == OP_ADD:
                    reg[i] = reg[ia] + reg[ib]
                    for m in range(NV):
                        dreg[i, m] = dreg[ia, m] + dreg[ib, m]
                elif op == OP_SUB:
                    reg[i] = reg[ia] - reg[ib]
                    for m in range(NV):
                        dreg[i, m] = dreg[ia, m] - dreg[ib, m]
                elif op == OP_MUL:
                    reg[i] = reg[ia] * reg[ib]
                    for m in range(NV):
                        dreg[i, m] = reg[ia] * dreg[ib, m] + reg[ib] * dreg[ia, m]
                elif op == OP_DIV:
                    v = reg[ib]
                    if v == 0.0:
                        err[0] = 1; err[1] = i; err[2] = b
                        break
                    q = reg[ia] / v
                    reg[i] = q
                    for m in range(NV):
                        dreg[i, m] = (dreg[ia, m] - q * dreg[ib, m]) / v
                elif op == OP_NEG:
                    reg[i] = -reg[ia]
                    for m in range(NV):
                        dreg[i, m] = -dreg[ia, m]
                elif op == OP_SIN:
                    a = reg[ia]
                    reg[i] = sin(a)
                    c = cos(a)
                    for m in range(NV):
                        dreg[i, m] = c * dreg[ia, m]
                elif op == OP_COS:
                    a = reg[ia]
                    reg[i] = cos(a)
                    c = -sin(a)
                    for m in range(NV):
                        dreg[i, m] = c * dreg[ia, m]
                elif op == OP_EXP:
                    v = exp(reg[ia])
                    reg[i] = v
                    for m in range(NV):
                        dreg[i, m] = v * dreg[ia, m]
                elif op == OP_LOG:
                    a = reg[ia]
                    if a <= 0.0:
                        err[0] = 2; err[1] = i; err[2] = b
                        break
                    reg[i] = log(a)
                    for m in range(NV):
                        dreg[i, m] = dreg[ia, m] / a
                elif op == OP_SQRT:
                    a = reg[ia]
                    if a < 0.0:
                        err[0] = 3; err[1] = i; err[2] = b
                        break
                    s = sqrt(a)
                    reg[i] = s
                    for m in range(NV):
                        dreg[i, m] = dreg[ia, m] / (2.0 * s)
                elif op == OP_IPOW:
                    a = reg[ia]
                    k = ib
                    if k < 0 and a == 0.0:
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    if k == 0:
                        reg[i] = 1.0
                        for m in range(NV):
                            dreg[i, m] = 0.0
                    else:
                        reg[i] = _ipow(a, k)
                        c = k * _ipow(a, k - 1)
                        for m in range(NV):
                            dreg[i, m] = c * dreg[ia, m]
                elif op == OP_POWC:
                    a = reg[ia]
                    if a <= 0.0:
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    reg[i] = pow(a, consts[i])
                    c = consts[i] * pow(a, consts[i] - 1.0)
                    for m in range(NV):
                        dreg[i, m] = c * dreg[ia, m]
                elif op == OP_POW:
                    a = reg[ia]
                    if a <= 0.0:
                        err[0] = 4; err[1] = i; err[2] = b
                        break
                    v = pow(a, reg[ib])
                    reg[i] = v
                    c = log(a)
                    for m in range(NV):
                        dreg[i, m] = v * (dreg[ib, m] * c + reg[ib] * dreg[ia, m] / a)
            if err[0] != 0:
                break
            out[b] = reg[K - 1]
            for m in range(NV):
                grad[b, m] = dreg[K - 1, m]
