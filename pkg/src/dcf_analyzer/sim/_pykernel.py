"""Pure-Python slot loop; reference twin of ``_kernel.pyx``.

Kept statement-for-statement parallel to the compiled kernel so a given seed
yields identical counters from either backend. Roughly two orders of
magnitude slower; used when the extension is not built.
"""
import math

IDLE, BACKOFF, POST, READY = 0, 1, 2, 3

BACKEND = "python"


def run_kernel(N, W, m, sigma, T_s, T_c, T_e, lam_per_us, p_e, capture, threshold,
               mean_power, queue_capacity, post_backoff, busy_decrement, max_slots, min_time,
               gen_arrivals, gen_backoff, gen_fading, gen_errors,
               attempts, succ_per, backoff_hist, mult_hist, capture_by_mult):
    uniform_b = gen_backoff.random
    uniform_f = gen_fading.random
    uniform_e = gen_errors.random
    exp_a = gen_arrivals.standard_exponential
    exp_f = gen_fading.standard_exponential
    mean_power = [float(x) for x in mean_power]

    state = [IDLE] * N
    stage = [0] * N
    cnt = [0] * N
    backlog = [0] * N
    tx = [0] * N
    power = [0.0] * N
    inf = math.inf

    slots = slots_idle = successes = collisions = 0
    collision_slots = captures = errors = arrivals = dropped = 0
    t = 0.0
    busy_time = 0.0
    cap_total = 1 + queue_capacity
    n = 0
    winner = -1
    lost = False
    pending = False
    has_arrivals = lam_per_us > 0.0

    nexta = [exp_a() / lam_per_us if has_arrivals else inf for _ in range(N)]

    while True:
        for j in range(N):
            while nexta[j] <= t:
                arrivals += 1
                if backlog[j] < cap_total:
                    backlog[j] += 1
                    if state[j] == IDLE:
                        state[j] = BACKOFF
                        stage[j] = 0
                        cnt[j] = int(uniform_b() * W)
                        backoff_hist[0, cnt[j]] += 1
                    elif state[j] == POST:
                        state[j] = BACKOFF
                    elif state[j] == READY:
                        state[j] = BACKOFF
                        cnt[j] = 0
                else:
                    dropped += 1
                nexta[j] += exp_a() / lam_per_us

        if pending:
            for a in range(n):
                j = tx[a]
                if j == winner and not lost:
                    successes += 1
                    succ_per[j] += 1
                    backlog[j] -= 1
                    stage[j] = 0
                    if backlog[j] > 0:
                        cnt[j] = int(uniform_b() * W)
                        backoff_hist[0, cnt[j]] += 1
                    elif post_backoff:
                        cnt[j] = int(uniform_b() * W)
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
                    cnt[j] = int(uniform_b() * Wi)
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
            jb = max_slots - slots
            if t < min_time:
                ja = math.ceil((min_time - t) / sigma)
                if ja > jb:
                    jb = ja
            if jb < 1:
                jb = 1
            J = jb
            for j in range(N):
                if state[j] == BACKOFF:
                    if cnt[j] < J:
                        J = cnt[j]
                elif nexta[j] < inf:
                    ja = math.ceil((nexta[j] - t) / sigma)
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
            ref = int(uniform_f() * n)
            for a in range(n):
                power[a] = mean_power[tx[a]] * exp_f()
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
            u = uniform_e()
            lost = u < p_e
            dur = T_e if lost else T_s
        else:
            dur = T_c
        t += dur
        busy_time += dur
        slots += 1
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
