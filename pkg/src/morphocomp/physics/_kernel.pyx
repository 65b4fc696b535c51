# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernel; mirrors ``_pykernel.run_steps`` operation for operation."""
from libc.math cimport sin, sqrt, M_PI, isfinite

import numpy as np
cimport numpy as cnp

cnp.import_array()

# params vector layout, shared with _pykernel
cdef enum:
    P_L0 = 0
    P_DT = 1
    P_TSTEPS = 2
    P_G = 3
    P_CD = 4
    P_DRAG = 5
    P_KG = 6
    P_GDAMP = 7
    P_MU = 8
    P_DMAX = 9
    P_VCAP = 10


cdef inline double _clamp_scale(double s) nogil:
    if s < 0.6:
        return 0.6
    if s > 1.6:
        return 1.6
    return s


cdef void _actuate(const cnp.int64_t[::1] vox_kind, double[::1] scales, long t, long t_steps,
                   int s1, int s2, double dmax) noexcept nogil:
    cdef double c = <double>(t % t_steps) / <double>t_steps
    cdef double a = 1.1 + 0.5 * sin(2.0 * M_PI * c)
    cdef double b = 1.1 + 0.5 * sin(2.0 * M_PI * c + M_PI)
    cdef double target1 = 1.6 if s1 else 0.6
    cdef double target2 = 1.6 if s2 else 0.6
    cdef double tgt, d
    cdef Py_ssize_t v
    cdef cnp.int64_t kind
    for v in range(vox_kind.shape[0]):
        kind = vox_kind[v]
        if kind == 3:
            scales[v] = _clamp_scale(a)
        elif kind == 4:
            scales[v] = _clamp_scale(b)
        elif 5 <= kind <= 8:
            if kind == 5:
                tgt = target1
            elif kind == 6:
                tgt = 0.6 if s1 else 1.6
            elif kind == 7:
                tgt = target2
            else:
                tgt = 0.6 if s2 else 1.6
            d = tgt - scales[v]
            if d > dmax:
                d = dmax
            elif d < -dmax:
                d = -dmax
            scales[v] = _clamp_scale(scales[v] + d)
        else:
            scales[v] = 1.0


def run_steps(double[:, ::1] pos, double[:, ::1] vel, const double[::1] mass,
              const cnp.int64_t[::1] spr_i, const cnp.int64_t[::1] spr_j,
              const cnp.int64_t[::1] spr_kind, const double[::1] spr_k,
              const cnp.int64_t[::1] spr_o1, const cnp.int64_t[::1] spr_o2,
              const cnp.int64_t[::1] vox_kind, double[::1] scales,
              const double[::1] params, long t0, long n_steps, int s1, int s2, int actuate_flag,
              double[:, ::1] com_out, double[:, ::1] scales_out):
    cdef double L0 = params[P_L0]
    cdef double dt = params[P_DT]
    cdef long t_steps = <long>params[P_TSTEPS]
    cdef double g = params[P_G]
    cdef double cd = params[P_CD]
    cdef double drag = params[P_DRAG]
    cdef double kg = params[P_KG]
    cdef double gdamp = params[P_GDAMP]
    cdef double mu = params[P_MU]
    cdef double dmax = params[P_DMAX]
    cdef double vcap = params[P_VCAP]

    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t m = spr_i.shape[0]
    cdef Py_ssize_t nv = scales.shape[0]
    cdef bint record_scales = scales_out.shape[0] > 0
    cdef double[:, ::1] force = np.empty((n, 2))
    cdef double[::1] fxs = np.empty(m)
    cdef double[::1] fys = np.empty(m)

    cdef double total_mass = 0.0
    cdef Py_ssize_t i, j, s, v, k
    for i in range(n):
        total_mass += mass[i]

    # raw pointers into the C-contiguous buffers
    cdef double* P = &pos[0, 0]
    cdef double* V = &vel[0, 0]
    cdef double* F = &force[0, 0]
    cdef const double* M = &mass[0]
    cdef double* FX = &fxs[0] if m > 0 else NULL
    cdef double* FY = &fys[0] if m > 0 else NULL
    cdef const cnp.int64_t* SI = &spr_i[0] if m > 0 else NULL
    cdef const cnp.int64_t* SJ = &spr_j[0] if m > 0 else NULL
    cdef const cnp.int64_t* SK = &spr_kind[0] if m > 0 else NULL
    cdef const double* KS = &spr_k[0] if m > 0 else NULL
    cdef const cnp.int64_t* O1 = &spr_o1[0] if m > 0 else NULL
    cdef const cnp.int64_t* O2 = &spr_o2[0] if m > 0 else NULL
    cdef double* S = &scales[0]

    cdef double inv, sa, sb, rest, dx, dy, length, ux, uy, vrel, mag
    cdef double normal, want, cap, fric, speed, cx, cy
    cdef long status = 0

    with nogil:
        for k in range(n_steps):
            if actuate_flag:
                _actuate(vox_kind, scales, t0 + k, t_steps, s1, s2, dmax)
            if record_scales:
                for v in range(nv):
                    scales_out[k, v] = S[v]

            for i in range(n):
                F[2 * i] = 0.0
                F[2 * i + 1] = -M[i] * g

            # spring forces, accumulated in the same order as the numpy kernel
            for s in range(m):
                sa = S[O1[s]]
                sb = S[O2[s]] if O2[s] >= 0 else sa
                if SK[s] == 0:
                    rest = 0.5 * (sa + sb) * L0
                elif SK[s] == 1:
                    rest = L0
                else:
                    rest = L0 * sqrt(sa * sa + 1.0)
                i = SI[s]
                j = SJ[s]
                dx = P[2 * i] - P[2 * j]
                dy = P[2 * i + 1] - P[2 * j + 1]
                length = sqrt(dx * dx + dy * dy)
                if length > 1e-12:
                    inv = 1.0 / length
                    ux = dx * inv
                    uy = dy * inv
                else:
                    ux = 0.0
                    uy = 0.0
                vrel = (V[2 * i] - V[2 * j]) * ux + (V[2 * i + 1] - V[2 * j + 1]) * uy
                mag = -KS[s] * (length - rest) - cd * vrel
                FX[s] = mag * ux
                FY[s] = mag * uy
            for s in range(m):
                F[2 * SI[s]] += FX[s]
            for s in range(m):
                F[2 * SI[s] + 1] += FY[s]
            for s in range(m):
                F[2 * SJ[s]] += -FX[s]
            for s in range(m):
                F[2 * SJ[s] + 1] += -FY[s]

            for i in range(n):
                if P[2 * i + 1] < 0.0:
                    normal = kg * (-P[2 * i + 1]) - gdamp * V[2 * i + 1]
                    if normal < 0.0:
                        normal = 0.0
                    F[2 * i + 1] += normal
                    want = -(M[i] * V[2 * i] / dt + F[2 * i])
                    cap = mu * normal
                    if want > cap:
                        fric = cap
                    elif want < -cap:
                        fric = -cap
                    else:
                        fric = want
                    F[2 * i] += fric

            cx = 0.0
            cy = 0.0
            for i in range(n):
                V[2 * i] = (V[2 * i] + F[2 * i] / M[i] * dt) * drag
                V[2 * i + 1] = (V[2 * i + 1] + F[2 * i + 1] / M[i] * dt) * drag
                speed = sqrt(V[2 * i] * V[2 * i] + V[2 * i + 1] * V[2 * i + 1])
                if speed > vcap:
                    V[2 * i] *= vcap / speed
                    V[2 * i + 1] *= vcap / speed
                P[2 * i] += V[2 * i] * dt
                P[2 * i + 1] += V[2 * i + 1] * dt
                if not (isfinite(P[2 * i]) and isfinite(P[2 * i + 1])
                        and isfinite(V[2 * i]) and isfinite(V[2 * i + 1])):
                    status = k + 1
                cx += M[i] * P[2 * i]
                cy += M[i] * P[2 * i + 1]
            if status:
                break
            com_out[k, 0] = cx / total_mass
            com_out[k, 1] = cy / total_mass
    return status
