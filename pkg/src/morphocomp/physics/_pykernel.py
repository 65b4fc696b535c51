"""Pure numpy implementation of the stepping kernel.

Same call signature and semantics as the compiled ``_kernel.run_steps``;
selected automatically when the extension is not built.
"""
import math

import numpy as np

# params vector layout, shared with the compiled kernel
P_L0, P_DT, P_TSTEPS, P_G, P_CD, P_DRAG, P_KG, P_GDAMP, P_MU, P_DMAX, P_VCAP = range(11)
N_PARAMS = 11

H_SPRING, V_SPRING, D_SPRING = 0, 1, 2


def actuate(vox_kind, scales, t, t_steps, s1, s2, dmax):
    """Update per-voxel scales in place for physics step ``t``."""
    c = (t % t_steps) / t_steps
    a = 1.1 + 0.5 * math.sin(2.0 * math.pi * c)
    b = 1.1 + 0.5 * math.sin(2.0 * math.pi * c + math.pi)
    target1 = 1.6 if s1 else 0.6
    target2 = 1.6 if s2 else 0.6
    for v in range(vox_kind.shape[0]):
        kind = vox_kind[v]
        if kind == 3:
            scales[v] = min(1.6, max(0.6, a))
        elif kind == 4:
            scales[v] = min(1.6, max(0.6, b))
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
            scales[v] = min(1.6, max(0.6, scales[v] + d))
        else:
            scales[v] = 1.0


def rest_lengths(spr_kind, spr_o1, spr_o2, scales, L0):
    s1 = scales[spr_o1]
    s2 = np.where(spr_o2 >= 0, scales[np.maximum(spr_o2, 0)], s1)
    sbar = 0.5 * (s1 + s2)
    return np.where(spr_kind == H_SPRING, sbar * L0,
                    np.where(spr_kind == V_SPRING, L0, L0 * np.sqrt(s1 * s1 + 1.0)))


def run_steps(pos, vel, mass, spr_i, spr_j, spr_kind, spr_k, spr_o1, spr_o2,
              vox_kind, scales, params, t0, n_steps, s1, s2, actuate_flag,
              com_out, scales_out):
    """Advance the state ``n_steps`` steps in place.

    Returns 0 on success, otherwise ``k + 1`` where ``k`` is the index of
    the first step that produced a non-finite coordinate.
    """
    L0 = params[P_L0]
    dt = params[P_DT]
    t_steps = int(params[P_TSTEPS])
    g = params[P_G]
    cd = params[P_CD]
    drag = params[P_DRAG]
    kg = params[P_KG]
    gdamp = params[P_GDAMP]
    mu = params[P_MU]
    dmax = params[P_DMAX]
    vcap = params[P_VCAP]
    total_mass = mass.sum()
    record_scales = scales_out is not None and scales_out.shape[0] > 0
    force = np.empty_like(pos)

    for k in range(n_steps):
        t = t0 + k
        if actuate_flag:
            actuate(vox_kind, scales, t, t_steps, s1, s2, dmax)
        if record_scales:
            scales_out[k, :] = scales

        force[:, 0] = 0.0
        force[:, 1] = -mass * g

        rest = rest_lengths(spr_kind, spr_o1, spr_o2, scales, L0)
        d = pos[spr_i] - pos[spr_j]
        length = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        inv = 1.0 / np.where(length > 1e-12, length, 1.0)
        ux = np.where(length > 1e-12, d[:, 0] * inv, 0.0)
        uy = np.where(length > 1e-12, d[:, 1] * inv, 0.0)
        dv = vel[spr_i] - vel[spr_j]
        vrel = dv[:, 0] * ux + dv[:, 1] * uy
        mag = -spr_k * (length - rest) - cd * vrel
        fx = mag * ux
        fy = mag * uy
        np.add.at(force[:, 0], spr_i, fx)
        np.add.at(force[:, 1], spr_i, fy)
        np.add.at(force[:, 0], spr_j, -fx)
        np.add.at(force[:, 1], spr_j, -fy)

        below = pos[:, 1] < 0.0
        if below.any():
            normal = np.where(below, kg * (-pos[:, 1]) - gdamp * vel[:, 1], 0.0)
            normal = np.maximum(normal, 0.0)
            force[:, 1] += normal
            # friction that would cancel horizontal motion this step, capped at mu*N
            want = -(mass * vel[:, 0] / dt + force[:, 0])
            cap = mu * normal
            fric = np.minimum(np.maximum(want, -cap), cap)
            force[:, 0] += fric

        vel += force / mass[:, None] * dt
        vel *= drag
        speed = np.sqrt(vel[:, 0] * vel[:, 0] + vel[:, 1] * vel[:, 1])
        over = speed > vcap
        if over.any():
            vel[over] *= (vcap / speed[over])[:, None]
        pos += vel * dt

        if not (np.isfinite(pos).all() and np.isfinite(vel).all()):
            return k + 1
        com_out[k, 0] = (mass * pos[:, 0]).sum() / total_mass
        com_out[k, 1] = (mass * pos[:, 1]).sum() / total_mass
    return 0
