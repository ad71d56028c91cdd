"""Compiled inner loop for the stochastic mode integrator.

Each step is a velocity-Verlet update of the conservative force
(-w0^2 x - eps x^3) followed by exact viscous decay of the velocity and an
additive stochastic impulse carrying thermal, external and feedback force.
The in-loop lock-in is a two-pole RC low-pass on each quadrature.
"""

import math

import numpy as np
from numba import njit

FB_OFF = 0
FB_COOL = 1
FB_EXCITE = 2

STATUS_OK = 0
STATUS_STOPPED = 1
STATUS_DIVERGED = 2


@njit(cache=True, nogil=True)
def integrate(
    state,  # float64[2]: x, v (updated in place)
    lockin,  # float64[4]: i1, i2, q1, q2 (updated in place)
    k0,  # absolute step index of state
    n_steps,
    dt,
    omega0_sq,
    eps,
    decay,  # exp(-gamma dt)
    inv_mass,
    noise_scale,  # impulse std in m/s per unit normal
    normals,  # float64[n_steps]
    meas_normals,  # float64[n_steps] or empty
    meas_std,
    stride,
    out,  # float64[>= n_steps // stride], written from index out_pos
    out_pos,
    fb_mode,
    omega_c,
    alpha,
    gain,
    cos_off,
    sin_off,
    force_limit,
    stop_amp,
):
    x = state[0]
    v = state[1]
    i1 = lockin[0]
    i2 = lockin[1]
    q1 = lockin[2]
    q2 = lockin[3]
    use_lockin = fb_mode != FB_OFF or stop_amp > 0.0
    have_meas = meas_normals.shape[0] > 0
    half_dt = 0.5 * dt
    acc = -omega0_sq * x - eps * x * x * x
    status = STATUS_OK
    done = 0
    for j in range(n_steps):
        k = k0 + j
        force = 0.0
        if use_lockin:
            xm = x
            if have_meas:
                xm += meas_std * meas_normals[j]
            ph = omega_c * (k * dt)
            c = math.cos(ph)
            s = math.sin(ph)
            i1 += alpha * (2.0 * xm * c - i1)
            i2 += alpha * (i1 - i2)
            q1 += alpha * (-2.0 * xm * s - q1)
            q2 += alpha * (q1 - q2)
            if stop_amp > 0.0 and i2 * i2 + q2 * q2 >= stop_amp * stop_amp:
                status = STATUS_STOPPED
                break
            if fb_mode != FB_OFF:
                ir = i2 * cos_off - q2 * sin_off
                qr = i2 * sin_off + q2 * cos_off
                v_est = -omega_c * (ir * s + qr * c)
                if fb_mode == FB_COOL:
                    force = -gain * v_est
                else:
                    amp = math.sqrt(ir * ir + qr * qr)
                    if amp > 0.0:
                        force = gain * v_est / (omega_c * amp)
                    else:
                        force = -gain * s
                if force > force_limit:
                    force = force_limit
                elif force < -force_limit:
                    force = -force_limit
        v += half_dt * acc
        x += dt * v
        acc = -omega0_sq * x - eps * x * x * x
        v += half_dt * acc
        v = decay * v + noise_scale * normals[j] + force * dt * inv_mass
        done = j + 1
        if not (math.isfinite(x) and math.isfinite(v)):
            status = STATUS_DIVERGED
            break
        if (k + 1) % stride == 0:
            out[out_pos] = x
            out_pos += 1
    state[0] = x
    state[1] = v
    lockin[0] = i1
    lockin[1] = i2
    lockin[2] = q1
    lockin[3] = q2
    return done, out_pos, status
