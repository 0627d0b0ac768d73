# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loop. Must stay step-for-step identical to ``_pykernel.py``:
both consume the same numpy bit generators in the same order."""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport ceil, INFINITY
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_exponential, random_standard_uniform

import numpy as np

cdef enum:
    IDLE = 0
    BACKOFF = 1
    POST = 2
    READY = 3

BACKEND = "cython"


cdef bitgen_t* _bitgen(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a BitGenerator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def run_kernel(int N, long W, int m, double sigma, double T_s, double T_c, double T_e,
               double lam_per_us, double p_e, bint capture, double threshold,
               double[::1] mean_power, long queue_capacity, bint post_backoff, bint busy_decrement,
               long long max_slots, double min_time,
               object gen_arrivals, object gen_backoff, object gen_fading, object gen_errors,
               long long[::1] attempts, long long[::1] succ_per, long long[:, ::1] backoff_hist,
               long long[::1] mult_hist, long long[::1] capture_by_mult):
    cdef bitgen_t* rng_a = _bitgen(gen_arrivals)
    cdef bitgen_t* rng_b = _bitgen(gen_backoff)
    cdef bitgen_t* rng_f = _bitgen(gen_fading)
    cdef bitgen_t* rng_e = _bitgen(gen_errors)

    cdef long[::1] state = np.zeros(N, dtype=np.int_)
    cdef long[::1] stage = np.zeros(N, dtype=np.int_)
    cdef long[::1] cnt = np.zeros(N, dtype=np.int_)
    cdef long[::1] backlog = np.zeros(N, dtype=np.int_)
    cdef double[::1] nexta = np.empty(N, dtype=np.float64)
    cdef long[::1] tx = np.empty(N, dtype=np.int_)
    cdef double[::1] power = np.empty(N, dtype=np.float64)

    cdef long long slots = 0, slots_idle = 0, successes = 0, collisions = 0
    cdef long long collision_slots = 0, captures = 0, errors = 0, arrivals = 0, dropped = 0
    cdef double t = 0.0, busy_time = 0.0, dur, interf, u
    cdef long cap_total = 1 + queue_capacity
    cdef long j, a, n = 0, winner = -1, ref, J, ja, jb, Wi
    cdef bint lost = False, pending = False, has_arrivals = lam_per_us > 0.0

    for j in range(N):
        if has_arrivals:
            nexta[j] = random_standard_exponential(rng_a) / lam_per_us
        else:
            nexta[j] = INFINITY

    while True:
        # arrivals up to the current slot boundary
        for j in range(N):
            while nexta[j] <= t:
                arrivals += 1
                if backlog[j] < cap_total:
                    backlog[j] += 1
                    if state[j] == IDLE:
                        state[j] = BACKOFF
                        stage[j] = 0
                        cnt[j] = <long> (random_standard_uniform(rng_b) * W)
                        backoff_hist[0, cnt[j]] += 1
                    elif state[j] == POST:
                        state[j] = BACKOFF
                    elif state[j] == READY:
                        state[j] = BACKOFF
                        cnt[j] = 0
                else:
                    dropped += 1
                nexta[j] += random_standard_exponential(rng_a) / lam_per_us

        # a busy period resolves after its own arrivals, which see the
        # occupancy the station had while transmitting
        if pending:
            for a in range(n):
                j = tx[a]
                if j == winner and not lost:
                    successes += 1
                    succ_per[j] += 1
                    backlog[j] -= 1
                    stage[j] = 0
                    if backlog[j] > 0:
                        cnt[j] = <long> (random_standard_uniform(rng_b) * W)
                        backoff_hist[0, cnt[j]] += 1
                    elif post_backoff:
                        cnt[j] = <long> (random_standard_uniform(rng_b) * W)
                        backoff_hist[0, cnt[j]] += 1
                        state[j] = POST if cnt[j] > 0 else READY
                    else:
                        state[j] = IDLE
                else:
                    if j == winner:
                        errors += 1
                    else:
                        collisions += 1
                    if stage[j] < m:
                        stage[j] += 1
                    Wi = W << stage[j]
                    cnt[j] = <long> (random_standard_uniform(rng_b) * Wi)
                    backoff_hist[stage[j], cnt[j]] += 1
            pending = False

        if slots >= max_slots and t >= min_time:
            break

        n = 0
        for j in range(N):
            if state[j] == BACKOFF and cnt[j] == 0:
                tx[n] = j
                n += 1

        if n == 0:
            # jump over idle slots until a counter expires or an idle station gets a packet
            jb = max_slots - slots
            if t < min_time:
                ja = <long> ceil((min_time - t) / sigma)
                if ja > jb:
                    jb = ja
            if jb < 1:
                jb = 1
            J = jb
            for j in range(N):
                if state[j] == BACKOFF:
                    if cnt[j] < J:
                        J = cnt[j]
                elif nexta[j] < INFINITY:
                    ja = <long> ceil((nexta[j] - t) / sigma)
                    if ja < 1:
                        ja = 1
                    if ja < J:
                        J = ja
            t += J * sigma
            slots += J
            slots_idle += J
            for j in range(N):
                if state[j] == BACKOFF:
                    cnt[j] -= J
                elif state[j] == POST:
                    cnt[j] -= J
                    if cnt[j] <= 0:
                        cnt[j] = 0
                        state[j] = READY
            continue

        mult_hist[n] += 1
        for a in range(n):
            attempts[tx[a]] += 1

        winner = -1
        if n == 1:
            winner = tx[0]
        elif capture:
            ref = <long> (random_standard_uniform(rng_f) * n)
            for a in range(n):
                power[a] = mean_power[tx[a]] * random_standard_exponential(rng_f)
            interf = 0.0
            for a in range(n):
                if a != ref:
                    interf += power[a]
            if power[ref] / interf > threshold:
                winner = tx[ref]
                captures += 1
                capture_by_mult[n] += 1
            else:
                collision_slots += 1
        else:
            collision_slots += 1

        lost = False
        if winner >= 0:
            u = random_standard_uniform(rng_e)
            lost = u < p_e
            dur = T_e if lost else T_s
        else:
            dur = T_c
        t += dur
        busy_time += dur
        slots += 1

        # the slot boundary that ends a busy period counts as one backoff slot
        # for everyone who stayed silent (transmitters redraw instead)
        if busy_decrement:
            for j in range(N):
                if state[j] == BACKOFF and cnt[j] > 0:
                    cnt[j] -= 1
                elif state[j] == POST:
                    cnt[j] -= 1
                    if cnt[j] <= 0:
                        cnt[j] = 0
                        state[j] = READY
        pending = True

    return {
        "slots_total": slots, "slots_idle": slots_idle, "successes": successes,
        "collisions": collisions, "collision_slots": collision_slots, "captures": captures,
        "channel_error_losses": errors, "arrivals": arrivals, "dropped": dropped,
        "busy_time": busy_time, "total_time": t,
    }
