/* Galerkin element-pair integrals of the double-layer (D) and hypersingular
 * (N) forms for piecewise-linear elements, with table-evaluated radial
 * functions.
 *
 * For a test element X and a trial element Y the quadrature accumulates ten
 * complex sums S[a][b][f] (test hat a, trial hat b). Both orientations (X, Y)
 * and (Y, X) are finished from the same sums, so every unordered element pair
 * is integrated once, always with the element of smaller id as X. That makes
 * each entry independent of the block, the batch and the thread that asks for
 * it.
 *
 * Sum order f: phi_T' (ny.zh), phi_T' (nx.zh), Df z0, Df z1, phi_L, phi_T,
 * g1, g2 zh0 zh0, g2 zh0 zh1, g2 zh1 zh1.
 *
 * Geometry rows hold: start(2), tangent(2), normal(2), length, tau_sign. */
#ifndef ELASTOFDS_GALERKIN_KERNEL_H
#define ELASTOFDS_GALERKIN_KERNEL_H

#include <complex.h>
#include <math.h>
#include <string.h>

#define EF_NF 12      /* packed table columns: phi_T, phi_L, phi_T', Df, g1, g2 */
#define EF_DEG 16
#define EF_MAXQ 16
#define EF_NS 10
#define EF_MAXORD 16
#define EF_MAXRULE 64

#define EF_NOINLINE __attribute__((noinline))

typedef struct {
    const double *coeffs;   /* [n_int][EF_DEG][EF_NF] */
    int n_int;
    double w_min, width, r_c, log_rc, r_lo, r_hi;
    int clamp;              /* clamp out-of-range distances instead of failing */
} ef_table;

typedef struct {
    ef_table far, rem;
    double mu, kappa, rho_omega2;
    double log_coeff_g, rr_coeff_g, k1_coeff;
    int is_static;
    const double *gnodes;   /* [EF_MAXQ + 1][EF_MAXQ], row q = q-point Gauss on [0, 1] */
    const double *gweights;
    int n_orders;
    double order_bound[EF_MAXORD];
    int order_q[EF_MAXORD];
    /* graded rules for touching pairs */
    int n_outer;
    const double *outer_g, *outer_w;      /* vertex outer, graded toward 0 */
    const double *outer_c_g, *outer_c_w;  /* coincident outer (same length), graded toward 0 */
    int n_inner_c;
    const double *inner_c_g, *inner_c_w;  /* coincident inner, split at the outer point */
    int n_inner_v;
    const double *inner_v_g, *inner_v_w;  /* vertex inner, graded toward the vertex */
} ef_ctx;

typedef double ef_v4 __attribute__((vector_size(32)));

static inline ef_v4 ef_load(const double *p)
{
    ef_v4 v;
    memcpy(&v, p, sizeof v);
    return v;
}

static inline ef_v4 ef_splat(double x)
{
    return (ef_v4){x, x, x, x};
}

static inline void ef_clenshaw(const double *restrict c, double t, double *restrict out)
{
    ef_v4 a0 = {0}, a1 = {0}, a2 = {0}, b0 = {0}, b1 = {0}, b2 = {0};
    const ef_v4 t2 = ef_splat(2.0 * t);
    const ef_v4 tv = ef_splat(t);
    for (int j = EF_DEG - 1; j >= 3; j -= 2) {
        const double *cj = c + j * EF_NF, *ck = cj - EF_NF;
        b0 = ef_load(cj) + t2 * a0 - b0;
        b1 = ef_load(cj + 4) + t2 * a1 - b1;
        b2 = ef_load(cj + 8) + t2 * a2 - b2;
        a0 = ef_load(ck) + t2 * b0 - a0;
        a1 = ef_load(ck + 4) + t2 * b1 - a1;
        a2 = ef_load(ck + 8) + t2 * b2 - a2;
    }
    b0 = ef_load(c + EF_NF) + t2 * a0 - b0;
    b1 = ef_load(c + EF_NF + 4) + t2 * a1 - b1;
    b2 = ef_load(c + EF_NF + 8) + t2 * a2 - b2;
    const ef_v4 r0 = ef_load(c) + tv * b0 - a0;
    const ef_v4 r1 = ef_load(c + 4) + tv * b1 - a1;
    const ef_v4 r2 = ef_load(c + 8) + tv * b2 - a2;
    memcpy(out, &r0, sizeof r0);
    memcpy(out + 4, &r1, sizeof r1);
    memcpy(out + 8, &r2, sizeof r2);
}

/* radial values at r; returns 1 when r is outside a non-clamping table */
static inline int ef_radial(const ef_table *t, double r, double *restrict v)
{
    if (!(r >= t->r_lo && r <= t->r_hi)) {
        if (!t->clamp || r != r) {
            return 1;
        }
        r = r < t->r_lo ? t->r_lo : t->r_hi;
    }
    const double w = r < t->r_c ? log(r) : t->log_rc + (r - t->r_c) / t->r_c;
    const double pos = (w - t->w_min) / t->width;
    int idx = (int)floor(pos);
    idx = idx < 0 ? 0 : (idx > t->n_int - 1 ? t->n_int - 1 : idx);
    ef_clenshaw(t->coeffs + (long)idx * EF_DEG * EF_NF, 2.0 * (pos - idx) - 1.0, v);
    return 0;
}

/* Quadrature sums S[a][b][2 * EF_NS] (re, im interleaved) over the outer rule
 * (up, wp) on X and an inner rule on Y. kind 0: fixed inner rule (qn, qw, nq);
 * kind 1: the fixed rule is a graded base split at each outer point. */
static EF_NOINLINE int ef_sums(const ef_table *tab, const double *restrict gx,
                               const double *restrict gy, int np, const double *restrict up,
                               const double *restrict wp, int kind, int nq,
                               const double *restrict qn, const double *restrict qw,
                               double *restrict S)
{
    const double hx = gx[6], hy = gy[6];
    const double nx0 = gx[4], nx1 = gx[5], ny0 = gy[4], ny1 = gy[5];
    ef_v4 acc[2][2][5];
    memset(acc, 0, sizeof acc);
    double tn[EF_MAXRULE], tw[EF_MAXRULE];
    double v[EF_NF];
    int mq = nq;
    const double *in = qn, *iw = qw;
    for (int ip = 0; ip < np; ++ip) {
        const double u = up[ip], w = wp[ip];
        const double x0 = gx[0] + u * hx * gx[2];
        const double x1 = gx[1] + u * hx * gx[3];
        if (kind == 1) {
            for (int k = 0; k < nq; ++k) {
                tn[k] = u - u * qn[k];
                tw[k] = u * qw[k];
                tn[nq + k] = u + (1.0 - u) * qn[k];
                tw[nq + k] = (1.0 - u) * qw[k];
            }
            mq = 2 * nq;
            in = tn;
            iw = tw;
        }
        ef_v4 In[2][5];
        memset(In, 0, sizeof In);
        for (int iq = 0; iq < mq; ++iq) {
            const double s = in[iq], ws = iw[iq];
            const double z0 = x0 - (gy[0] + s * hy * gy[2]);
            const double z1 = x1 - (gy[1] + s * hy * gy[3]);
            const double r = sqrt(z0 * z0 + z1 * z1);
            if (ef_radial(tab, r, v)) {
                return 1;
            }
            const double inv_r = 1.0 / r;
            const double zh0 = z0 * inv_r, zh1 = z1 * inv_r;
            const double nyz = ny0 * zh0 + ny1 * zh1;
            const double nxz = nx0 * zh0 + nx1 * zh1;
            const ef_v4 F0 = (ef_v4){v[4], v[5], v[4], v[5]} * (ef_v4){nyz, nyz, nxz, nxz};
            const ef_v4 F1 = (ef_v4){v[6], v[7], v[6], v[7]} * (ef_v4){z0, z0, z1, z1};
            const ef_v4 F2 = (ef_v4){v[2], v[3], v[0], v[1]};
            const ef_v4 F3 = (ef_v4){v[8], v[9], v[10], v[11]}
                             * (ef_v4){1.0, 1.0, zh0 * zh0, zh0 * zh0};
            const ef_v4 F4 = (ef_v4){v[10], v[11], v[10], v[11]}
                             * (ef_v4){zh0 * zh1, zh0 * zh1, zh1 * zh1, zh1 * zh1};
            const ef_v4 wb0 = ef_splat(ws * (1.0 - s)), wb1 = ef_splat(ws * s);
            In[0][0] += wb0 * F0;
            In[0][1] += wb0 * F1;
            In[0][2] += wb0 * F2;
            In[0][3] += wb0 * F3;
            In[0][4] += wb0 * F4;
            In[1][0] += wb1 * F0;
            In[1][1] += wb1 * F1;
            In[1][2] += wb1 * F2;
            In[1][3] += wb1 * F3;
            In[1][4] += wb1 * F4;
        }
        const ef_v4 wa0 = ef_splat(w * (1.0 - u)), wa1 = ef_splat(w * u);
        for (int b = 0; b < 2; ++b) {
            for (int k = 0; k < 5; ++k) {
                acc[0][b][k] += wa0 * In[b][k];
                acc[1][b][k] += wa1 * In[b][k];
            }
        }
    }
    memcpy(S, acc, sizeof acc);
    return 0;
}

/* ------------------------------------------------------------------------ */
/* finishing: sums -> element matrices                                       */

typedef double complex ef_c;

static inline ef_c ef_get(const double *S, int a, int b, int f)
{
    const double *p = S + ((a * 2 + b) * EF_NS + f) * 2;
    return p[0] + I * p[1];
}

/* Write D and N (16 complex each, [test hat][trial hat][i][j]) for one
 * orientation. ``swap`` = 0: X is the test element; 1: Y is the test element. */
static EF_NOINLINE void ef_finish(const ef_ctx *c, const double *S, const double *gx,
                                  const double *gy, int swap, ef_c *restrict D,
                                  ef_c *restrict N)
{
    const double scale = gx[6] * gy[6];
    const double nx[2] = {gx[4], gx[5]}, ny[2] = {gy[4], gy[5]};
    const double dA[2] = {-gx[7] / gx[6], gx[7] / gx[6]};
    const double dB[2] = {-gy[7] / gy[6], gy[7] / gy[6]};
    const double two_mu = 2.0 * c->mu;
    /* test-side quantities for the chosen orientation */
    const double *nt = swap ? ny : nx, *nr = swap ? nx : ny;
    const double *dT = swap ? dB : dA, *dR = swap ? dA : dB;
    const double sgn = swap ? -1.0 : 1.0;   /* z' = -z for the swapped orientation */
    const int f_pr = swap ? 1 : 0;          /* phi_T' (trial normal . zh) */
    const int f_pt = swap ? 0 : 1;          /* phi_T' (test normal . zh) */
    const double tt[2] = {-nt[1], nt[0]}, tr[2] = {-nr[1], nr[0]};
    /* totals over both hats */
    ef_c tot_L = 0, tot_T = 0, tot_g1 = 0, tot_zz[3] = {0, 0, 0};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            tot_L += ef_get(S, a, b, 4);
            tot_T += ef_get(S, a, b, 5);
            tot_g1 += ef_get(S, a, b, 6);
            for (int k = 0; k < 3; ++k) {
                tot_zz[k] += ef_get(S, a, b, 7 + k);
            }
        }
    }
    /* n2 = 4 mu ((kappa phi_L - phi_T - g1) I - g2 zz) */
    const ef_c c2 = c->kappa * tot_L - tot_T - tot_g1;
    const ef_c n2[2][2] = {{4.0 * c->mu * (c2 - tot_zz[0]), -4.0 * c->mu * tot_zz[1]},
                           {-4.0 * c->mu * tot_zz[1], 4.0 * c->mu * (c2 - tot_zz[2])}};
    /* per test hat t (summed over trial hats): d3 and n3; per trial hat s: n4 */
    ef_c d3[2][2][2], n3[2][2][2], n4[2][2][2];
    for (int t = 0; t < 2; ++t) {
        ef_c pT = 0, g1 = 0, zz[3] = {0, 0, 0}, ptz = 0, dz[2] = {0, 0};
        ef_c prz = 0, rz[2] = {0, 0};
        for (int s = 0; s < 2; ++s) {
            const int a = swap ? s : t, b = swap ? t : s;     /* test-hat sums */
            pT += ef_get(S, a, b, 5);
            g1 += ef_get(S, a, b, 6);
            for (int k = 0; k < 3; ++k) {
                zz[k] += ef_get(S, a, b, 7 + k);
            }
            ptz += ef_get(S, a, b, f_pt);
            dz[0] += ef_get(S, a, b, 2);
            dz[1] += ef_get(S, a, b, 3);
            const int a2 = swap ? t : s, b2 = swap ? s : t;   /* trial-hat sums */
            prz += ef_get(S, a2, b2, f_pr);
            rz[0] += ef_get(S, a2, b2, 2);
            rz[1] += ef_get(S, a2, b2, 3);
        }
        /* mu G = (phi_T + g1) I + g2 zz; d3 = -(phi_T E + 2 mu G E^T) */
        const ef_c mg[2][2] = {{pT + g1 + zz[0], zz[1]}, {zz[1], pT + g1 + zz[2]}};
        d3[t][0][0] = -(2.0 * -mg[0][1]);
        d3[t][0][1] = -(-pT + 2.0 * mg[0][0]);
        d3[t][1][0] = -(pT + 2.0 * -mg[1][1]);
        d3[t][1][1] = -(2.0 * mg[1][0]);
        /* n3 = 2 mu (phi_T' (nt.zh') E + Df nt (E z')^T), z' = sgn z */
        const ef_c ptzs = sgn * ptz, ez0 = -sgn * dz[1], ez1 = sgn * dz[0];
        n3[t][0][0] = two_mu * (nt[0] * ez0);
        n3[t][0][1] = two_mu * (-ptzs + nt[0] * ez1);
        n3[t][1][0] = two_mu * (ptzs + nt[1] * ez0);
        n3[t][1][1] = two_mu * (nt[1] * ez1);
        /* n4 = 2 mu (phi_T' (nr.zh') E - Df (E z') nr^T), per trial hat t */
        const ef_c przs = sgn * prz, fz0 = -sgn * rz[1], fz1 = sgn * rz[0];
        n4[t][0][0] = two_mu * (-fz0 * nr[0]);
        n4[t][0][1] = two_mu * (-przs - fz0 * nr[1]);
        n4[t][1][0] = two_mu * (przs - fz1 * nr[0]);
        n4[t][1][1] = two_mu * (-fz1 * nr[1]);
    }
    const double rw2 = c->rho_omega2;
    for (int t = 0; t < 2; ++t) {
        for (int s = 0; s < 2; ++s) {
            const int a = swap ? s : t, b = swap ? t : s;
            const ef_c pr = sgn * ef_get(S, a, b, f_pr);
            const ef_c dz[2] = {sgn * ef_get(S, a, b, 2), sgn * ef_get(S, a, b, 3)};
            const ef_c pL = ef_get(S, a, b, 4), pT = ef_get(S, a, b, 5);
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    /* d12 = -phi_T' (nr.zh') I + Df z' nr^T */
                    ef_c d = dz[i] * nr[j] + dR[s] * d3[t][i][j];
                    if (i == j) {
                        d -= pr;
                    }
                    const ef_c n = rw2 * (pL * (nt[i] * nr[j]) + pT * (tt[i] * tr[j]))
                                   + (dT[t] * dR[s]) * n2[i][j] + dR[s] * n3[t][i][j]
                                   + dT[t] * n4[s][i][j];
                    D[((t * 2 + s) * 2 + i) * 2 + j] = scale * d;
                    N[((t * 2 + s) * 2 + i) * 2 + j] = scale * n;
                }
            }
        }
    }
}

/* ------------------------------------------------------------------------ */
/* orders and pair classification                                           */

static inline double ef_effective_distance(const double *gx, const double *gy)
{
    const double cx0 = gx[0] + 0.5 * gx[6] * gx[2], cx1 = gx[1] + 0.5 * gx[6] * gx[3];
    const double cy0 = gy[0] + 0.5 * gy[6] * gy[2], cy1 = gy[1] + 0.5 * gy[6] * gy[3];
    return hypot(cx0 - cy0, cx1 - cy1) - 0.5 * (gx[6] + gy[6]);
}

static inline int ef_order(const ef_ctx *c, double ratio, int floor_q)
{
    int q = c->order_q[c->n_orders - 1];
    for (int k = 0; k < c->n_orders; ++k) {
        if (ratio < c->order_bound[k]) {
            q = c->order_q[k];
            break;
        }
    }
    return q < floor_q ? floor_q : q;
}

/* 0: apart; 1: coincident; 2: sharing a vertex (sv, tv = vertex parameters) */
static inline int ef_classify(const double *gx, const double *gy, double *sv, double *tv)
{
    const double hx = gx[6], hy = gy[6];
    const double tol = 1e-10 * (hx > hy ? hx : hy);
    const double x0[2] = {gx[0], gx[1]}, y0[2] = {gy[0], gy[1]};
    const double x1[2] = {gx[0] + hx * gx[2], gx[1] + hx * gx[3]};
    const double y1[2] = {gy[0] + hy * gy[2], gy[1] + hy * gy[3]};
#define EF_CLOSE(p, q) (hypot((p)[0] - (q)[0], (p)[1] - (q)[1]) <= tol)
    const int c00 = EF_CLOSE(x0, y0), c11 = EF_CLOSE(x1, y1);
    const int c10 = EF_CLOSE(x1, y0), c01 = EF_CLOSE(x0, y1);
#undef EF_CLOSE
    if (c00 && c11) {
        return 1;
    }
    if (c10) { *sv = 1.0; *tv = 0.0; return 2; }
    if (c01) { *sv = 0.0; *tv = 1.0; return 2; }
    if (c00) { *sv = 0.0; *tv = 0.0; return 2; }
    if (c11) { *sv = 1.0; *tv = 1.0; return 2; }
    return 0;
}

/* Tensor-Gauss D and N for a pair that does not touch, in the requested
 * orientations. ``Dxy``/``Nxy`` (X test) and ``Dyx``/``Nyx`` (Y test) may be
 * NULL. ``idx``/``idy`` decide the canonical integration order. */
static inline int ef_far_pair(const ef_ctx *c, const double *gx, const double *gy, long idx,
                              long idy, int oscx, int oscy, ef_c *Dxy, ef_c *Nxy, ef_c *Dyx,
                              ef_c *Nyx)
{
    double S[2 * 2 * EF_NS * 2];
    const double d = ef_effective_distance(gx, gy);
    const int qx = ef_order(c, d / gx[6], oscx);
    const int qy = ef_order(c, d / gy[6], oscy);
    const int swap = idx > idy;
    const double *g1 = swap ? gy : gx, *g2 = swap ? gx : gy;
    const int q1 = swap ? qy : qx, q2 = swap ? qx : qy;
    if (ef_sums(&c->far, g1, g2, q1, c->gnodes + q1 * EF_MAXQ, c->gweights + q1 * EF_MAXQ, 0,
                q2, c->gnodes + q2 * EF_MAXQ, c->gweights + q2 * EF_MAXQ, S)) {
        return 1;
    }
    if (Dxy) {
        ef_finish(c, S, g1, g2, swap, Dxy, Nxy);
    }
    if (Dyx) {
        ef_finish(c, S, g1, g2, !swap, Dyx, Nyx);
    }
    return 0;
}

/* ------------------------------------------------------------------------ */
/* touching pairs: Kelvin singular part analytically, remainder by graded rules */

#define EF_TWO_PI 6.283185307179586476925286766559

/* Hat-weighted integrals over segment gy for the point xp:
 * lg[b] = int N_b log r, srr[b][i][j] = int N_b z_i z_j / r^2,
 * zr[b][i] = int N_b z_i / r^2 (z = xp - y). */
static void ef_segment_moments(const double *xp, const double *gy, double lg[2],
                               double srr[2][2][2], double zr[2][2])
{
    const double e[2] = {gy[2], gy[3]}, nv[2] = {-gy[3], gy[2]};
    const double h = gy[6];
    const double w0 = xp[0] - gy[0], w1 = xp[1] - gy[1];
    const double a = w0 * e[0] + w1 * e[1];
    double b = w0 * nv[0] + w1 * nv[1];
    if (fabs(b) <= 1e-13 * h) {
        b = 0.0;
    }
    const double u2 = a, u1 = a - h, b2 = b * b;
    const double q2 = u2 * u2 + b2, q1 = u1 * u1 + b2;
    const double lg2 = log(q2 > 1e-300 ? q2 : 1e-300), lg1 = log(q1 > 1e-300 ? q1 : 1e-300);
    const double sb = (b > 0) - (b < 0);
    const double theta = sb * atan2(fabs(b) * (u2 - u1), b2 + u1 * u2);
    const double log0 = 0.5 * (u2 * lg2 - u1 * lg1) - (u2 - u1) + b * theta;
    const double log1u = 0.25 * ((q2 * lg2 - u2 * u2) - (q1 * lg1 - u1 * u1));
    const double lnr = 0.5 * (lg2 - lg1);
    const double puu0 = (u2 - u1) - b * theta;
    const double u3 = 0.5 * (u2 * u2 - u1 * u1) - 0.5 * b2 * (lg2 - lg1);
    const double m[6][2] = {
        {log0, a * log0 - log1u},
        {puu0, a * puu0 - u3},
        {b * lnr, a * b * lnr - b * puu0},
        {b * theta, a * b * theta - b2 * lnr},
        {lnr, a * lnr - puu0},
        {theta, a * theta - b * lnr},
    };
    for (int k = 0; k < 2; ++k) {
        double hat[6];
        for (int f = 0; f < 6; ++f) {
            hat[f] = k == 0 ? m[f][0] - m[f][1] / h : m[f][1] / h;
        }
        lg[k] = hat[0];
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                srr[k][i][j] = hat[1] * e[i] * e[j] + hat[2] * (e[i] * nv[j] + nv[i] * e[j])
                               + hat[3] * nv[i] * nv[j];
            }
            zr[k][i] = hat[4] * e[i] + hat[5] * nv[i];
        }
    }
}

/* D and N for a touching pair (kind 1 coincident, 2 vertex), X test. */
static EF_NOINLINE int ef_touch_pair(const ef_ctx *c, const double *gx, const double *gy,
                                     int kind, double sv, double tv, ef_c *D, ef_c *N)
{
    double up[2 * EF_MAXRULE], wp[2 * EF_MAXRULE];
    int np;
    const int no = c->n_outer;
    if (kind == 1) {
        for (int k = 0; k < no; ++k) {
            up[k] = 0.5 * c->outer_c_g[k];
            up[no + k] = 1.0 - 0.5 * c->outer_c_g[k];
            wp[k] = wp[no + k] = 0.5 * c->outer_c_w[k];
        }
        np = 2 * no;
    } else {
        for (int k = 0; k < no; ++k) {
            up[k] = sv == 0.0 ? c->outer_g[k] : 1.0 - c->outer_g[k];
            wp[k] = c->outer_w[k];
        }
        np = no;
    }
    const double hx = gx[6];
    const double nx[2] = {gx[4], gx[5]}, ny[2] = {gy[4], gy[5]};
    const double tx[2] = {-nx[1], nx[0]}, ty[2] = {-ny[1], ny[0]};
    const double dA[2] = {-gx[7] / hx, gx[7] / hx};
    const double dB[2] = {-gy[7] / gy[6], gy[7] / gy[6]};
    double log_ab[2][2] = {{0}}, srr_ab[2][2][2][2] = {{{{0}}}}, zr_ab[2][2][2] = {{{0}}};
    for (int p = 0; p < np; ++p) {
        const double xp[2] = {gx[0] + up[p] * hx * gx[2], gx[1] + up[p] * hx * gx[3]};
        double lg[2], srr[2][2][2], zr[2][2];
        ef_segment_moments(xp, gy, lg, srr, zr);
        const double na[2] = {(1.0 - up[p]) * wp[p] * hx, up[p] * wp[p] * hx};
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                log_ab[a][b] += na[a] * lg[b];
                for (int i = 0; i < 2; ++i) {
                    zr_ab[a][b][i] += na[a] * zr[b][i];
                    for (int j = 0; j < 2; ++j) {
                        srr_ab[a][b][i][j] += na[a] * srr[b][i][j];
                    }
                }
            }
        }
    }
    const double E[2][2] = {{0.0, -1.0}, {1.0, 0.0}};
    const double mu = c->mu;
    double log_1 = 0.0, srr_1[2][2] = {{0}};
    double nyz_ab[2][2], nxz_ab[2][2];
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            nyz_ab[a][b] = zr_ab[a][b][0] * ny[0] + zr_ab[a][b][1] * ny[1];
            nxz_ab[a][b] = zr_ab[a][b][0] * nx[0] + zr_ab[a][b][1] * nx[1];
            log_1 += log_ab[a][b];
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    srr_1[i][j] += srr_ab[a][b][i][j];
                }
            }
        }
    }
    for (int a = 0; a < 2; ++a) {
        const double log_a = log_ab[a][0] + log_ab[a][1];
        double srr_a[2][2];
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                srr_a[i][j] = srr_ab[a][0][i][j] + srr_ab[a][1][i][j];
            }
        }
        /* d3 = (1/2pi) log r E - 2 (Gs E^T), Gs = log_coeff log r I + rr_coeff zz/r^2 */
        double d3[2][2];
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                double gset = 0.0;   /* (Gs E^T)_ij = sum_k Gs_ik E_jk */
                for (int k = 0; k < 2; ++k) {
                    const double gs = (i == k ? c->log_coeff_g * log_a : 0.0)
                                      + c->rr_coeff_g * srr_a[i][k];
                    gset += gs * E[j][k];
                }
                d3[i][j] = log_a / EF_TWO_PI * E[i][j] - 2.0 * gset;
            }
        }
        const double n3s = (-2.0 * mu / EF_TWO_PI) * (nxz_ab[a][0] + nxz_ab[a][1]);
        for (int b = 0; b < 2; ++b) {
            const double n4s = (-2.0 * mu / EF_TWO_PI) * (nyz_ab[0][b] + nyz_ab[1][b]);
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    double d = (i == j ? nyz_ab[a][b] / EF_TWO_PI : 0.0) + d3[i][j] * dB[b];
                    double n = (-c->rho_omega2 / EF_TWO_PI) * log_ab[a][b]
                               * (nx[i] * ny[j] + tx[i] * ty[j]);
                    n += c->k1_coeff * ((i == j ? log_1 : 0.0) - srr_1[i][j]) * dA[a] * dB[b];
                    n += n3s * E[i][j] * dB[b] + n4s * E[i][j] * dA[a];
                    D[((a * 2 + b) * 2 + i) * 2 + j] = d;
                    N[((a * 2 + b) * 2 + i) * 2 + j] = n;
                }
            }
        }
    }
    if (c->is_static) {
        return 0;
    }
    /* dynamic remainder */
    double S[2 * 2 * EF_NS * 2];
    ef_c Dr[16], Nr[16];
    int status;
    if (kind == 1) {
        status = ef_sums(&c->rem, gx, gy, np, up, wp, 1, c->n_inner_c, c->inner_c_g,
                         c->inner_c_w, S);
    } else {
        double tn[EF_MAXRULE];
        for (int k = 0; k < c->n_inner_v; ++k) {
            tn[k] = tv == 0.0 ? c->inner_v_g[k] : 1.0 - c->inner_v_g[k];
        }
        status = ef_sums(&c->rem, gx, gy, np, up, wp, 0, c->n_inner_v, tn, c->inner_v_w, S);
    }
    if (status) {
        return 1;
    }
    ef_finish(c, S, gx, gy, 0, Dr, Nr);
    for (int k = 0; k < 16; ++k) {
        D[k] += Dr[k];
        N[k] += Nr[k];
    }
    return 0;
}

/* ------------------------------------------------------------------------ */
/* node-level gather                                                         */

/* out[rmap[i][r], cmap[j][q]] = K11 + K10 + K01 + K00 (fixed order), where
 * K_ab = K[pa[r], qb[q]][a][b][i][j]; K is [nex][ney][16]. */
static inline void ef_gather_row(const ef_c *K, long ney, long r, const long *p0,
                                 const long *p1, long nc, const long *q0, const long *q1,
                                 long nrows, const long *rmap, const long *cmap, ef_c *out,
                                 long ld)
{
    const ef_c *k0 = K + p0[r] * ney * 16, *k1 = K + p1[r] * ney * 16;
    for (int i = 0; i < 2; ++i) {
        ef_c *orow = out + rmap[i * nrows + r] * ld;
        for (long q = 0; q < nc; ++q) {
            const ef_c *a11 = k1 + q1[q] * 16 + 12, *a10 = k1 + q0[q] * 16 + 8;
            const ef_c *a01 = k0 + q1[q] * 16 + 4, *a00 = k0 + q0[q] * 16;
            for (int j = 0; j < 2; ++j) {
                const int o = i * 2 + j;
                orow[cmap[j * nc + q]] = ((a11[o] + a10[o]) + a01[o]) + a00[o];
            }
        }
    }
}

/* ------------------------------------------------------------------------ */
/* one row of an element block                                              */

/* Row i of the X-by-Y element block. K (and KN, KT, KTN) are complex arrays
 * passed as interleaved doubles: K[nx][ny][16], KT[ny][nx][16]. With
 * ``symmetric`` X and Y are the same list and the row covers j >= i, writing
 * both (i, j) and (j, i). Touching pairs are flagged and left at zero. */
static int ef_block_row(const ef_ctx *c, long i, long nx, const double *GX, const long *idx,
                        const int *oscx, long ny, const double *GY, const long *idy,
                        const int *oscy, double alpha_re, double alpha_im, int separate,
                        int symmetric, int check_touch, double *Kd, double *KNd, double *KTd,
                        double *KTNd, unsigned char *touch)
{
    ef_c *K = (ef_c *)Kd, *KN = (ef_c *)KNd, *KT = (ef_c *)KTd, *KTN = (ef_c *)KTNd;
    const ef_c alpha = alpha_re + I * alpha_im;
    ef_c Dxy[16], Nxy[16], Dyx[16], Nyx[16];
    const double *gx = GX + 8 * i;
    for (long j = symmetric ? i : 0; j < ny; ++j) {
        const double *gy = GY + 8 * j;
        double s_at, t_at;
        if (check_touch && ef_classify(gx, gy, &s_at, &t_at) != 0) {
            touch[i * ny + j] = 1;
            if (symmetric) {
                touch[j * ny + i] = 1;
            }
            continue;
        }
        const int both = (symmetric && j != i) || KT != NULL;
        if (ef_far_pair(c, gx, gy, idx[i], idy[j], oscx[i], oscy[j], Dxy, Nxy,
                        both ? Dyx : NULL, both ? Nyx : NULL)) {
            return 1;
        }
        ef_c *o = K + (i * ny + j) * 16;
        ef_c *on = separate ? KN + (i * ny + j) * 16 : NULL;
        for (int k = 0; k < 16; ++k) {
            if (separate) {
                o[k] = Dxy[k];
                on[k] = Nxy[k];
            } else {
                o[k] = Dxy[k] + alpha * Nxy[k];
            }
        }
        if (!both) {
            continue;
        }
        const long off = symmetric ? (j * ny + i) * 16 : (j * nx + i) * 16;
        ef_c *t = symmetric ? K + off : KT + off;
        ef_c *tn = separate ? (symmetric ? KN + off : KTN + off) : NULL;
        for (int k = 0; k < 16; ++k) {
            if (separate) {
                t[k] = Dyx[k];
                tn[k] = Nyx[k];
            } else {
                t[k] = Dyx[k] + alpha * Nyx[k];
            }
        }
    }
    return 0;
}

/* touching pair through interleaved buffers; returns 2 if the pair does not touch */
static int ef_touch_one(const ef_ctx *c, const double *gx, const double *gy, double *D,
                        double *N)
{
    double s_at = 0.0, t_at = 0.0;
    const int kind = ef_classify(gx, gy, &s_at, &t_at);
    if (kind == 0) {
        return 2;
    }
    return ef_touch_pair(c, gx, gy, kind, s_at, t_at, (ef_c *)D, (ef_c *)N);
}

static int ef_far_one(const ef_ctx *c, const double *gx, const double *gy, long idx, long idy,
                      int oscx, int oscy, double *D, double *N)
{
    return ef_far_pair(c, gx, gy, idx, idy, oscx, oscy, (ef_c *)D, (ef_c *)N, NULL, NULL);
}

static void ef_gather_rows(const double *K, long ney, long nr, const long *p0, const long *p1,
                           long nc, const long *q0, const long *q1, const long *rmap,
                           const long *cmap, double *out, long ld)
{
    for (long r = 0; r < nr; ++r) {
        ef_gather_row((const ef_c *)K, ney, r, p0, p1, nc, q0, q1, nr, rmap, cmap,
                      (ef_c *)out, ld);
    }
}

#endif
