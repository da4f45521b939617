# cython: language_level=3
"""Compiled trajectory kernels.

Operation-for-operation mirror of ``rolldisc._kernels_py``; see that module
and ``rolldisc.kernels`` for the calling conventions.  The linear algebra
is hand-rolled for the tiny fixed sizes involved (constraint counts m <= 6,
state dimension 9): Cholesky solves for the Gram projections, partially
pivoted Gaussian elimination for the Newton projection Jacobian.
"""

from libc.math cimport atan2, cos, fabs, fmod, hypot, sin, sqrt, M_PI

cdef double TWO_PI = 2.0 * M_PI
cdef double PROJ_TOL = 1e-10
cdef int PROJ_MAXITER = 50


cdef inline double _wrap(double x) nogil:
    """Principal angle in (-pi, pi] (matches the python backend's formula)."""
    cdef double y = fmod(-x + M_PI, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return -(y - M_PI)


cdef inline void _angle_pair(double* q, double* a_out, double* b_out) nogil:
    cdef double ux = q[0] - q[2]
    cdef double uy = q[1] - q[3]
    cdef double vx = q[4] - q[2]
    cdef double vy = q[5] - q[3]
    a_out[0] = atan2(ux * vy - uy * vx, ux * vx + uy * vy)
    b_out[0] = atan2(0.5 * (q[5] - q[1]) + 1.5 * q[3],
                     0.5 * (q[4] - q[0]) + 1.5 * q[2])


cdef inline void _advance_angles(double* q, double* carry) nogil:
    cdef double a, b
    _angle_pair(q, &a, &b)
    carry[2] += _wrap(a - carry[0])
    carry[3] += _wrap(b - carry[1])
    carry[0] = a
    carry[1] = b


cdef inline double _fold_half(double a_acc) nogil:
    """(a_acc mod 2 pi) / 2, in [0, pi) -- the folded shape angle."""
    cdef double y = fmod(a_acc, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return 0.5 * y


cdef int _build_rows(double* q, bint bonds, bint rolling, double C[6][9]) nogil:
    """Fill constraint rows (order: bonds, rolling, center); return row count."""
    cdef int m = 0
    cdef int i, j
    cdef double u12x = q[0] - q[2]
    cdef double u12y = q[1] - q[3]
    cdef double u23x = q[2] - q[4]
    cdef double u23y = q[3] - q[5]
    if bonds:
        for j in range(9):
            C[m][j] = 0.0
        C[m][0] = u12x; C[m][1] = u12y; C[m][2] = -u12x; C[m][3] = -u12y
        m += 1
        for j in range(9):
            C[m][j] = 0.0
        C[m][2] = u23x; C[m][3] = u23y; C[m][4] = -u23x; C[m][5] = -u23y
        m += 1
    if rolling:
        for j in range(9):
            C[m][j] = 0.0
        C[m][0] = -u12y; C[m][1] = u12x; C[m][2] = u12y; C[m][3] = -u12x
        C[m][6] = -0.5; C[m][7] = -0.5
        m += 1
        for j in range(9):
            C[m][j] = 0.0
        C[m][2] = -u23y; C[m][3] = u23x; C[m][4] = u23y; C[m][5] = -u23x
        C[m][7] = -0.5; C[m][8] = -0.5
        m += 1
    for j in range(9):
        C[m][j] = 0.0
    C[m][0] = 1.0; C[m][2] = 1.0; C[m][4] = 1.0
    m += 1
    for j in range(9):
        C[m][j] = 0.0
    C[m][1] = 1.0; C[m][3] = 1.0; C[m][5] = 1.0
    m += 1
    return m


cdef bint _cholesky(double G[6][6], int m) nogil:
    """In-place lower Cholesky; False on a non-positive pivot."""
    cdef int i, j, k
    cdef double s
    for i in range(m):
        for j in range(i + 1):
            s = G[i][j]
            for k in range(j):
                s -= G[i][k] * G[j][k]
            if i == j:
                if s <= 0.0:
                    return False
                G[i][i] = sqrt(s)
            else:
                G[i][j] = s / G[j][j]
    return True


cdef inline void _chol_solve(double L[6][6], int m, double* b) nogil:
    cdef int i, k
    cdef double s
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= L[i][k] * b[k]
        b[i] = s / L[i][i]
    for i in range(m - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, m):
            s -= L[k][i] * b[k]
        b[i] = s / L[i][i]


cdef bint _project_vec(double C[6][9], int m, double* v) nogil:
    """v <- v - C^T (C C^T)^-1 C v."""
    cdef double G[6][6]
    cdef double w[6]
    cdef int i, j, deep
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(9):
            s += C[i][j] * v[j]
        w[i] = s
        for j in range(i + 1):
            s = 0.0
            for deep in range(9):
                s += C[i][deep] * C[j][deep]
            G[i][j] = s
            G[j][i] = s
    if not _cholesky(G, m):
        return False
    _chol_solve(G, m, w)
    for j in range(9):
        s = 0.0
        for i in range(m):
            s += C[i][j] * w[i]
        v[j] -= s
    return True


cdef bint _solve_dense(double A[6][6], int m, double* b) nogil:
    """Gaussian elimination with partial pivoting, in place."""
    cdef int col, row, piv, k
    cdef double best, factor, tmp
    for col in range(m):
        piv = col
        best = fabs(A[col][col])
        for row in range(col + 1, m):
            if fabs(A[row][col]) > best:
                best = fabs(A[row][col])
                piv = row
        if best == 0.0:
            return False
        if piv != col:
            for k in range(m):
                tmp = A[col][k]; A[col][k] = A[piv][k]; A[piv][k] = tmp
            tmp = b[col]; b[col] = b[piv]; b[piv] = tmp
        for row in range(col + 1, m):
            factor = A[row][col] / A[col][col]
            if factor != 0.0:
                for k in range(col, m):
                    A[row][k] -= factor * A[col][k]
                b[row] -= factor * b[col]
    for col in range(m - 1, -1, -1):
        tmp = b[col]
        for k in range(col + 1, m):
            tmp -= A[col][k] * b[k]
        b[col] = tmp / A[col][col]
    return True


cdef inline void _position_residual(double* q, double* r) nogil:
    cdef double u12x = q[0] - q[2]
    cdef double u12y = q[1] - q[3]
    cdef double u23x = q[2] - q[4]
    cdef double u23y = q[3] - q[5]
    r[0] = 0.5 * (u12x * u12x + u12y * u12y - 1.0)
    r[1] = 0.5 * (u23x * u23x + u23y * u23y - 1.0)
    r[2] = q[0] + q[2] + q[4]
    r[3] = q[1] + q[3] + q[5]


cdef int _project_position(double* q) nogil:
    """Newton pull-back onto the bond/center manifold; 0 on success."""
    cdef double base[6][9]
    cdef double rows[6][9]
    cdef double jac[6][6]
    cdef double res[6]
    cdef double mu[4]
    cdef double current[9]
    cdef double maxres
    cdef int it, i, j, k
    _build_rows(q, True, False, base)
    for i in range(4):
        mu[i] = 0.0
    for i in range(9):
        current[i] = q[i]
    for it in range(PROJ_MAXITER):
        _position_residual(current, res)
        maxres = 0.0
        for i in range(4):
            if fabs(res[i]) > maxres:
                maxres = fabs(res[i])
        if maxres < PROJ_TOL:
            for i in range(9):
                q[i] = current[i]
            return 0
        _build_rows(current, True, False, rows)
        for i in range(4):
            for j in range(4):
                jac[i][j] = 0.0
                for k in range(9):
                    jac[i][j] += rows[i][k] * base[j][k]
            res[i] = -res[i]
        if not _solve_dense(jac, 4, res):
            return 2
        for i in range(4):
            mu[i] += res[i]
        for i in range(9):
            current[i] = q[i]
            for j in range(4):
                current[i] += base[j][i] * mu[j]
    return 1


cdef inline double _bond_dev(double* q) nogil:
    cdef double d1 = fabs(hypot(q[0] - q[2], q[1] - q[3]) - 1.0)
    cdef double d2 = fabs(hypot(q[2] - q[4], q[3] - q[5]) - 1.0)
    return d1 if d1 > d2 else d2


cdef inline void _soft_force(double* q, double k_bond, double* f) nogil:
    cdef int i
    cdef double ux, uy, length, pull
    for i in range(9):
        f[i] = 0.0
    ux = q[0] - q[2]; uy = q[1] - q[3]
    length = hypot(ux, uy)
    pull = 2.0 * k_bond * (length - 1.0) / length
    f[0] -= pull * ux; f[1] -= pull * uy
    f[2] += pull * ux; f[3] += pull * uy
    ux = q[2] - q[4]; uy = q[3] - q[5]
    length = hypot(ux, uy)
    pull = 2.0 * k_bond * (length - 1.0) / length
    f[2] -= pull * ux; f[3] -= pull * uy
    f[4] += pull * ux; f[5] += pull * uy


cdef inline long _frame_slot(long t, long n_warmup, long stride) nogil:
    if t <= n_warmup or (t - n_warmup) % stride != 0:
        return -1
    return (t - n_warmup) // stride - 1


def langevin_chunk(
    double[::1] q,
    double[::1] p,
    double[:, ::1] noise,
    double dt,
    double mass,
    double gamma,
    double sigma,
    double k_bond,
    int rolling,
    int hard,
    int soft_rows,
    long step_offset,
    long n_warmup,
    long stride,
    double[::1] carry,
    double[::1] out_omega,
    double[::1] out_omega_acc,
    double[::1] out_phi_acc,
    double[:, ::1] out_theta,
):
    """Compiled counterpart of rolldisc._kernels_py.langevin_chunk."""
    cdef long n = noise.shape[0]
    cdef long i, t, slot
    cdef int j, m, status, deep
    cdef double sqrt_dt = sqrt(dt)
    cdef double drift = dt / mass
    cdef double damp = 1.0 - (gamma / mass) * dt
    cdef double kick = sigma * sqrt_dt
    cdef double C[6][9]
    cdef double force[9]
    cdef double resid, s, dev
    cdef bint use_bonds, use_rolling
    status = 0
    with nogil:
        for i in range(n):
            for j in range(9):
                q[j] += drift * p[j]
            if hard:
                status = _project_position(&q[0])
                if status != 0:
                    break
            for j in range(9):
                p[j] *= damp
            if not hard:
                _soft_force(&q[0], k_bond, force)
                for j in range(9):
                    p[j] += dt * force[j]
            for j in range(9):
                p[j] += kick * noise[i, j]
            if hard or soft_rows == 2:
                use_bonds = True
                use_rolling = rolling != 0
            elif soft_rows == 1 and rolling:
                use_bonds = False
                use_rolling = True
            else:
                use_bonds = False
                use_rolling = False
            m = _build_rows(&q[0], use_bonds, use_rolling, C)
            if not _project_vec(C, m, &p[0]):
                status = 3
                break
            _advance_angles(&q[0], &carry[0])
            t = step_offset + i + 1
            slot = _frame_slot(t, n_warmup, stride)
            if slot >= 0:
                out_omega[slot] = _fold_half(carry[2])
                out_omega_acc[slot] = 0.5 * carry[2]
                out_phi_acc[slot] = carry[3] - 0.5 * M_PI + 0.5 * carry[2]
                out_theta[slot, 0] = q[6]
                out_theta[slot, 1] = q[7]
                out_theta[slot, 2] = q[8]
                dev = _bond_dev(&q[0])
                if dev > carry[4]:
                    carry[4] = dev
                resid = 0.0
                for j in range(m):
                    s = 0.0
                    for deep in range(9):
                        s += C[j][deep] * p[deep]
                    if fabs(s) > resid:
                        resid = fabs(s)
                resid /= mass
                if resid > carry[5]:
                    carry[5] = resid
    if status == 1:
        raise RuntimeError("position projection stalled in langevin kernel")
    if status != 0:
        raise RuntimeError("singular constraint system in langevin kernel")


cdef bint _projection_matrix(double* q, bint rolling, double P[9][9]) nogil:
    """P = I - C^T (C C^T)^-1 C with the full manifold rows at q."""
    cdef double C[6][9]
    cdef double G[6][6]
    cdef double X[6][9]
    cdef int m, i, j, r
    cdef double s
    m = _build_rows(q, True, rolling, C)
    for i in range(m):
        for j in range(i + 1):
            s = 0.0
            for r in range(9):
                s += C[i][r] * C[j][r]
            G[i][j] = s
            G[j][i] = s
    if not _cholesky(G, m):
        return False
    # X = G^-1 C, column by column of C
    cdef double col[6]
    for j in range(9):
        for i in range(m):
            col[i] = C[i][j]
        _chol_solve(G, m, col)
        for i in range(m):
            X[i][j] = col[i]
    for i in range(9):
        for j in range(9):
            s = 0.0
            for r in range(m):
                s += C[r][i] * X[r][j]
            P[i][j] = (1.0 if i == j else 0.0) - s
    return True


def cartesian_chunk(
    double[::1] q,
    double[:, ::1] noise,
    double dt,
    int ito,
    int rolling,
    double beta,
    double gamma,
    double fd_step,
    long step_offset,
    long n_warmup,
    long stride,
    double[::1] carry,
    double[::1] out_omega,
    double[::1] out_omega_acc,
    double[::1] out_phi_acc,
    double[:, ::1] out_theta,
):
    """Compiled counterpart of rolldisc._kernels_py.cartesian_chunk."""
    cdef long n = noise.shape[0]
    cdef long i, t, slot
    cdef int j, k, m, r, status
    cdef double sqrt_dt = sqrt(dt)
    cdef double amp = sqrt(2.0 / (beta * gamma)) * sqrt_dt
    cdef double inv_bg = 1.0 / (beta * gamma)
    cdef double C[6][9]
    cdef double C1[6][9]
    cdef double base[9][9]
    cdef double drift[9]
    cdef double dw[9]
    cdef double v0[9]
    cdef double v1[9]
    cdef double shifted[9]
    cdef double dev, s
    cdef bint roll = rolling != 0
    status = 0
    with nogil:
        for i in range(n):
            if ito:
                if not _projection_matrix(&q[0], roll, base):
                    status = 3
                    break
                for k in range(9):
                    drift[k] = 0.0
                # drift_k = sum_ij P_ij d_j P_ik: with p_j = P e_j and the
                # derivative matrices symmetric this is sum_j (d_j P) p_j,
                # so only vector projections are needed at the shifted points.
                for j in range(6):
                    for k in range(9):
                        shifted[k] = q[k]
                        v0[k] = base[k][j]
                        v1[k] = base[k][j]
                    shifted[j] = q[j] + fd_step
                    m = _build_rows(shifted, True, roll, C)
                    if not _project_vec(C, m, v0):
                        status = 3
                        break
                    shifted[j] = q[j] - fd_step
                    m = _build_rows(shifted, True, roll, C1)
                    if not _project_vec(C1, m, v1):
                        status = 3
                        break
                    for k in range(9):
                        drift[k] += (v0[k] - v1[k]) / (2.0 * fd_step)
                if status != 0:
                    break
                for k in range(9):
                    s = 0.0
                    for r in range(9):
                        s += base[k][r] * noise[i, r]
                    q[k] += inv_bg * drift[k] * dt + amp * s
                status = _project_position(&q[0])
                if status != 0:
                    break
            else:
                for k in range(9):
                    dw[k] = sqrt_dt * noise[i, k]
                    v0[k] = dw[k]
                m = _build_rows(&q[0], True, roll, C)
                if not _project_vec(C, m, v0):
                    status = 3
                    break
                for k in range(9):
                    shifted[k] = q[k] + v0[k]
                    v1[k] = dw[k]
                m = _build_rows(shifted, True, roll, C1)
                if not _project_vec(C1, m, v1):
                    status = 3
                    break
                for k in range(9):
                    q[k] += 0.5 * (v0[k] + v1[k])
                status = _project_position(&q[0])
                if status != 0:
                    break
            _advance_angles(&q[0], &carry[0])
            t = step_offset + i + 1
            slot = _frame_slot(t, n_warmup, stride)
            if slot >= 0:
                out_omega[slot] = _fold_half(carry[2])
                out_omega_acc[slot] = 0.5 * carry[2]
                out_phi_acc[slot] = carry[3] - 0.5 * M_PI + 0.5 * carry[2]
                out_theta[slot, 0] = q[6]
                out_theta[slot, 1] = q[7]
                out_theta[slot, 2] = q[8]
                dev = _bond_dev(&q[0])
                if dev > carry[4]:
                    carry[4] = dev
    if status == 1:
        raise RuntimeError("position projection stalled in cartesian kernel")
    if status != 0:
        raise RuntimeError("singular constraint system in cartesian kernel")


cdef void _reduced_rows(double omega, double phi, bint rolling, double B[5][9]) nogil:
    cdef double s = sin(omega)
    cdef double c = cos(omega)
    cdef double sp = sin(phi)
    cdef double cp = cos(phi)
    cdef double k2 = 2.0 / 3.0 + 4.0 / 3.0 * c * c
    cdef double l2 = 2.0 / 3.0 + 4.0 / 3.0 * s * s
    cdef double dw0[6]
    cdef double x0[6]
    cdef double tw[9]
    cdef double tp[9]
    cdef double a1, a2, px, py, inv_sqrt3
    cdef double spin_w[3]
    cdef double spin_p[3]
    cdef double spin_r[3]
    cdef int d, j
    dw0[0] = -c; dw0[1] = s / 3.0; dw0[2] = 0.0
    dw0[3] = -2.0 * s / 3.0; dw0[4] = c; dw0[5] = s / 3.0
    x0[0] = -s; x0[1] = -c / 3.0; x0[2] = 0.0
    x0[3] = 2.0 * c / 3.0; x0[4] = s; x0[5] = -c / 3.0
    for d in range(5):
        for j in range(9):
            B[d][j] = 0.0
    if rolling:
        a1 = 1.0 / sqrt(k2 + 8.0)
        a2 = 1.0 / sqrt(l2 + 8.0 / 3.0)
        spin_w[0] = -2.0; spin_w[1] = 0.0; spin_w[2] = 2.0
        spin_p[0] = 2.0 / 3.0; spin_p[1] = 4.0 / 3.0; spin_p[2] = 2.0 / 3.0
        spin_r[0] = 1.0; spin_r[1] = -1.0; spin_r[2] = 1.0
        inv_sqrt3 = 1.0 / sqrt(3.0)
        for d in range(3):
            tw[2 * d] = (cp * dw0[2 * d] - sp * dw0[2 * d + 1]) * a1
            tw[2 * d + 1] = (sp * dw0[2 * d] + cp * dw0[2 * d + 1]) * a1
            px = cp * x0[2 * d] - sp * x0[2 * d + 1]
            py = sp * x0[2 * d] + cp * x0[2 * d + 1]
            tp[2 * d] = -py * a2
            tp[2 * d + 1] = px * a2
        for d in range(3):
            tw[6 + d] = spin_w[d] * a1
            tp[6 + d] = spin_p[d] * a2
        for j in range(9):
            B[0][j] = a1 * tw[j]
            B[1][j] = a2 * tp[j]
        for d in range(3):
            for j in range(9):
                B[2 + d][j] = (a1 * spin_w[d]) * tw[j] + (a2 * spin_p[d]) * tp[j]
            for j in range(3):
                B[2 + d][6 + j] += (spin_r[d] * inv_sqrt3) * (spin_r[j] * inv_sqrt3)
    else:
        for d in range(3):
            B[0][2 * d] = (cp * dw0[2 * d] - sp * dw0[2 * d + 1]) / k2
            B[0][2 * d + 1] = (sp * dw0[2 * d] + cp * dw0[2 * d + 1]) / k2
            px = cp * x0[2 * d] - sp * x0[2 * d + 1]
            py = sp * x0[2 * d] + cp * x0[2 * d + 1]
            B[1][2 * d] = -py / l2
            B[1][2 * d + 1] = px / l2
        for d in range(3):
            B[2 + d][6 + d] = 1.0


def reduced_chunk(
    double[::1] state,
    double[:, ::1] noise,
    double dt,
    int rolling,
    double lo,
    double hi,
    long step_offset,
    long n_warmup,
    long stride,
    double[::1] out_omega,
    double[::1] out_phi,
    double[:, ::1] out_theta,
):
    """Compiled counterpart of rolldisc._kernels_py.reduced_chunk."""
    cdef long n = noise.shape[0]
    cdef long i, t, slot
    cdef int d, j
    cdef double sqrt_dt = sqrt(dt)
    cdef double B0[5][9]
    cdef double B1[5][9]
    cdef double dw[9]
    cdef double incr[5]
    cdef double pred_w, pred_p, omega, s
    cdef bint roll = rolling != 0
    with nogil:
        for i in range(n):
            for j in range(9):
                dw[j] = sqrt_dt * noise[i, j]
            _reduced_rows(state[0], state[1], roll, B0)
            for d in range(5):
                s = 0.0
                for j in range(9):
                    s += B0[d][j] * dw[j]
                incr[d] = s
            pred_w = state[0] + incr[0]
            pred_p = state[1] + incr[1]
            _reduced_rows(pred_w, pred_p, roll, B1)
            for d in range(5):
                s = 0.0
                for j in range(9):
                    s += (B0[d][j] + B1[d][j]) * dw[j]
                state[d] += 0.5 * s
            omega = state[0]
            while omega < lo or omega > hi:
                if omega < lo:
                    omega = 2.0 * lo - omega
                else:
                    omega = 2.0 * hi - omega
            state[0] = omega
            t = step_offset + i + 1
            slot = _frame_slot(t, n_warmup, stride)
            if slot >= 0:
                out_omega[slot] = state[0]
                out_phi[slot] = state[1]
                out_theta[slot, 0] = state[2]
                out_theta[slot, 1] = state[3]
                out_theta[slot, 2] = state[4]
