#include "dnpvi/validate.hpp"

#include "dnpvi/error.hpp"
#include "dnpvi/quadrature.hpp"
#include "dnpvi/random.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dnpvi {

namespace {

constexpr int kMaxWitnesses = 5;
constexpr int kRayDoublings = 10;
constexpr int kDivergenceRun = 5;      // consecutive doublings
constexpr double kDivergenceFactor = 1.5;
constexpr double kJacobianStep = 1e-5;  // relative
constexpr double kAsymmetryTol = 1e-6;

using Vec = std::vector<double>;

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Vec eval_all(std::span<const Expr> exprs, std::span<const double> z, double x = 0.0, double y = 0.0,
             double t = 0.0) {
    Vec out(exprs.size());
    const EvalPoint<double> point{z, x, y, t};
    for (std::size_t i = 0; i < exprs.size(); ++i) out[i] = exprs[i].evaluate(point);
    return out;
}

Vec random_point(Rng& rng, int m, double w) {
    Vec z(static_cast<std::size_t>(m));
    for (auto& v : z) v = rng.uniform(-w, w);
    return z;
}

/// Box corners and the origin, followed by `samples` uniform draws.
std::vector<Vec> box_samples(Rng& rng, int m, const SampleBox& box) {
    std::vector<Vec> pts;
    pts.emplace_back(static_cast<std::size_t>(m), 0.0);
    for (int mask = 0; mask < (1 << m); ++mask) {
        Vec z(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) z[static_cast<std::size_t>(k)] = (mask >> k) & 1 ? box.half_width : -box.half_width;
        pts.push_back(std::move(z));
    }
    for (int i = 0; i < box.samples; ++i) pts.push_back(random_point(rng, m, box.half_width));
    return pts;
}

/// Unit directions: +-e_k and +-(1,..,1)/sqrt(m).
std::vector<Vec> ray_directions(int m) {
    std::vector<Vec> dirs;
    for (int k = 0; k < m; ++k) {
        for (double s : {1.0, -1.0}) {
            Vec d(static_cast<std::size_t>(m), 0.0);
            d[static_cast<std::size_t>(k)] = s;
            dirs.push_back(std::move(d));
        }
    }
    if (m > 1) {
        for (double s : {1.0, -1.0}) dirs.emplace_back(static_cast<std::size_t>(m), s / std::sqrt(double(m)));
    }
    return dirs;
}

Vec scaled(const Vec& d, double r) {
    Vec z = d;
    for (auto& v : z) v *= r;
    return z;
}

/// True when the sequence grows by more than the divergence factor over
/// `kDivergenceRun` consecutive steps.
bool diverges(const Vec& seq) {
    int run = 0;
    for (std::size_t k = 1; k < seq.size(); ++k) {
        if (seq[k] > kDivergenceFactor * seq[k - 1] && seq[k] > 0.0) {
            if (++run >= kDivergenceRun) return true;
        } else {
            run = 0;
        }
    }
    return false;
}

void add_witness(CheckEntry& entry, Witness w) {
    entry.verdict = Verdict::Fail;
    if (static_cast<int>(entry.witnesses.size()) < kMaxWitnesses) entry.witnesses.push_back(std::move(w));
}

void fail_eval(CheckEntry& entry, const Vec& z, const EvalError& err) {
    add_witness(entry, Witness{z, {}, fmt::format("evaluation failed: {}", err.what())});
}

std::string format_vec(const Vec& v) { return fmt::format("({:.6g})", fmt::join(v, ", ")); }

Eigen::MatrixXd eval_K(const ProblemSpec& spec, const Vec& z) {
    const Vec k = eval_all(spec.K, z);
    Eigen::MatrixXd K(spec.m, spec.m);
    for (int j = 0; j < spec.m; ++j) {
        for (int i = 0; i < spec.m; ++i) K(j, i) = k[static_cast<std::size_t>(j * spec.m + i)];
    }
    return K;
}

/// Points along the component-j axis, others zero: K^j is evaluated as a function of u_j alone.
Vec axis_point(int m, int j, double xi) {
    Vec z(static_cast<std::size_t>(m), 0.0);
    z[static_cast<std::size_t>(j)] = xi;
    return z;
}

}  // namespace

std::string_view verdict_name(Verdict v) noexcept {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::SampledPass: return "sampled-pass";
        case Verdict::Fail: return "fail";
    }
    return "?";
}

bool ValidationReport::passed() const {
    return std::none_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.verdict == Verdict::Fail; });
}

const CheckEntry* ValidationReport::find(std::string_view condition) const {
    for (const auto& e : entries) {
        if (e.condition == condition) return &e;
    }
    return nullptr;
}

std::string ValidationReport::to_text() const {
    std::string out;
    for (const auto& e : entries) {
        out += fmt::format("{:<14} {:<13} {}\n", e.condition, verdict_name(e.verdict), e.description);
        for (const auto& [name, value] : e.estimates) out += fmt::format("    {} = {:.6g}\n", name, value);
        for (const auto& w : e.witnesses) {
            out += "    witness:";
            if (!w.z1.empty()) out += " z1=" + format_vec(w.z1);
            if (!w.z2.empty()) out += " z2=" + format_vec(w.z2);
            out += " " + w.detail + "\n";
        }
    }
    out += passed() ? "result: all conditions pass\n" : "result: FAILED\n";
    return out;
}

double legendre_psi(std::span<const Expr> B, std::span<const double> z, int quad_n) {
    const auto rule = gauss_legendre(quad_n);
    const Vec bz = eval_all(B, z);
    double dot_bz = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) dot_bz += bz[k] * z[k];
    double integral = 0.0;
    Vec sz(z.size());
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const double s = rule.points[q][0];
        for (std::size_t k = 0; k < z.size(); ++k) sz[k] = s * z[k];
        const Vec bs = eval_all(B, sz);
        double dot = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) dot += bs[k] * z[k];
        integral += rule.weights[q] * dot;
    }
    return dot_bz - integral;
}

double legendre_psi(const ProblemSpec& spec, std::span<const double> z, int quad_n) {
    if (static_cast<int>(z.size()) != spec.m) throw InvalidArgument("legendre_psi: z has wrong length");
    return legendre_psi(spec.B, z, quad_n);
}

double kirchhoff_transform(const ProblemSpec& spec, int component, double z, int quad_n) {
    const auto rule = gauss_legendre(quad_n);
    const Expr& K = spec.K_at(component, component);
    double integral = 0.0;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const Vec pt = axis_point(spec.m, component, rule.points[q][0] * z);
        integral += rule.weights[q] * K.evaluate(EvalPoint<double>{pt});
    }
    return z * integral;
}

double kirchhoff_inverse(const ProblemSpec& spec, int component, double h) {
    // Bracket, then Newton with bisection fallback; K^j >= c1 > 0 makes the map increasing.
    double lo = -1.0;
    double hi = 1.0;
    while (kirchhoff_transform(spec, component, lo) > h) lo *= 2.0;
    while (kirchhoff_transform(spec, component, hi) < h) hi *= 2.0;
    double z = 0.5 * (lo + hi);
    const Expr& K = spec.K_at(component, component);
    for (int iter = 0; iter < 200; ++iter) {
        const double r = kirchhoff_transform(spec, component, z) - h;
        if (std::abs(r) <= 1e-14 * (1.0 + std::abs(h))) break;
        (r > 0.0 ? hi : lo) = z;
        const Vec pt = axis_point(spec.m, component, z);
        const double slope = K.evaluate(EvalPoint<double>{pt});
        double next = z - r / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        z = next;
    }
    return z;
}

CheckEntry check_monotone_gradient(const ProblemSpec& spec, const SampleBox& box) {
    CheckEntry entry{"A1", "B is strictly monotone with symmetric Jacobian (B = grad Phi)", Verdict::SampledPass, {}, {}};
    Rng rng(box.seed);
    const int m = spec.m;
    double min_mono = std::numeric_limits<double>::infinity();
    double max_asym = 0.0;
    for (int s = 0; s < box.samples; ++s) {
        const Vec z1 = random_point(rng, m, box.half_width);
        const Vec z2 = random_point(rng, m, box.half_width);
        try {
            const Vec b1 = eval_all(spec.B, z1);
            const Vec b2 = eval_all(spec.B, z2);
            double dot = 0.0;
            double dist2 = 0.0;
            for (int k = 0; k < m; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                dot += (b1[kk] - b2[kk]) * (z1[kk] - z2[kk]);
                dist2 += (z1[kk] - z2[kk]) * (z1[kk] - z2[kk]);
            }
            min_mono = std::min(min_mono, dot / dist2);
            if (!(dot > 0.0)) {
                add_witness(entry, Witness{z1, z2, fmt::format("(B(z1)-B(z2)).(z1-z2) = {:.6g} <= 0", dot)});
            }
            if (m > 1) {
                Eigen::MatrixXd J(m, m);
                for (int j = 0; j < m; ++j) {
                    const double h = kJacobianStep * (1.0 + std::abs(z1[static_cast<std::size_t>(j)]));
                    Vec zp = z1;
                    Vec zm = z1;
                    zp[static_cast<std::size_t>(j)] += h;
                    zm[static_cast<std::size_t>(j)] -= h;
                    const Vec bp = eval_all(spec.B, zp);
                    const Vec bm = eval_all(spec.B, zm);
                    for (int i = 0; i < m; ++i) J(i, j) = (bp[static_cast<std::size_t>(i)] - bm[static_cast<std::size_t>(i)]) / (2.0 * h);
                }
                const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
                const double asym = (J - J.transpose()).cwiseAbs().maxCoeff() / scale;
                max_asym = std::max(max_asym, asym);
                if (asym > kAsymmetryTol) {
                    add_witness(entry, Witness{z1, {}, fmt::format("Jacobian asymmetry {:.3g} > {:.1g}", asym, kAsymmetryTol)});
                }
            }
        } catch (const EvalError& err) {
            fail_eval(entry, z1, err);
            break;
        }
        if (static_cast<int>(entry.witnesses.size()) >= kMaxWitnesses) break;
    }
    entry.estimates["min_monotonicity_ratio"] = min_mono;
    if (m > 1) entry.estimates["max_jacobian_asymmetry"] = max_asym;
    return entry;
}

CheckEntry check_psi_coercive(const ProblemSpec& spec, const SampleBox& box) {
    CheckEntry entry{"A1-coercive", fmt::format("Psi(z) >= c1 |z|^(nu+1) - c2 with nu = {}", spec.nu),
                     Verdict::SampledPass, {}, {}};
    const double power = spec.nu + 1.0;
    double c1 = std::numeric_limits<double>::infinity();
    try {
        for (const Vec& d : ray_directions(spec.m)) {
            Vec ratios;
            for (int k = 0; k < kRayDoublings; ++k) {
                const double r = box.half_width * std::ldexp(1.0, k);
                ratios.push_back(legendre_psi(spec, scaled(d, r)) / std::pow(r, power));
            }
            Vec inverse(ratios.size());
            std::transform(ratios.begin(), ratios.end(), inverse.begin(),
                           [](double v) { return v > 0.0 ? 1.0 / v : std::numeric_limits<double>::infinity(); });
            if (ratios.back() <= 0.0 || diverges(inverse)) {
                add_witness(entry, Witness{scaled(d, box.half_width * std::ldexp(1.0, kRayDoublings - 1)), {},
                                           fmt::format("Psi(z)/|z|^(nu+1) decays along the ray (last ratio {:.3g})",
                                                       ratios.back())});
            }
            c1 = std::min(c1, ratios.back());
        }
    } catch (const EvalError& err) {
        fail_eval(entry, {}, err);
        return entry;
    }
    c1 = std::max(c1, 0.0);
    Rng rng(box.seed + 1);
    double c2 = 0.0;
    for (const Vec& z : box_samples(rng, spec.m, box)) {
        try {
            const double psi = legendre_psi(spec, z);
            if (psi < -1e-12 * (1.0 + norm(z))) {
                add_witness(entry, Witness{z, {}, fmt::format("Psi(z) = {:.6g} < 0", psi)});
            }
            c2 = std::max(c2, c1 * std::pow(norm(z), power) - psi);
        } catch (const EvalError& err) {
            fail_eval(entry, z, err);
            break;
        }
    }
    entry.estimates["c1"] = c1;
    entry.estimates["c2"] = c2;
    return entry;
}

CheckEntry check_K_pd_bounded(const ProblemSpec& spec, const SampleBox& box) {
    CheckEntry entry{"A2", "K uniformly positive definite, K and e bounded", Verdict::SampledPass, {}, {}};
    Rng rng(box.seed + 2);
    double c_ellip = std::numeric_limits<double>::infinity();
    double bound = 0.0;
    const auto coefficient_bound = [&](const Vec& z) {
        const Vec k = eval_all(spec.K, z);
        const Vec e = eval_all(spec.e, z);
        double b = 0.0;
        for (int j = 0; j < spec.m; ++j) {
            double emax = 0.0;
            for (int d = 0; d < spec.dim; ++d) emax = std::max(emax, std::abs(e[static_cast<std::size_t>(j * spec.dim + d)]));
            for (int i = 0; i < spec.m; ++i) b = std::max(b, std::abs(k[static_cast<std::size_t>(j * spec.m + i)]) + emax);
        }
        return b;
    };
    for (const Vec& z : box_samples(rng, spec.m, box)) {
        try {
            const Eigen::MatrixXd K = eval_K(spec, z);
            const Eigen::MatrixXd S = 0.5 * (K + K.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
            const double lmin = eig.eigenvalues()(0);
            c_ellip = std::min(c_ellip, lmin);
            if (!(lmin > 0.0)) {
                const Eigen::VectorXd xi = eig.eigenvectors().col(0);
                const double form = xi.dot(K * xi);
                add_witness(entry, Witness{z, Vec(xi.data(), xi.data() + xi.size()),
                                           fmt::format("K xi . xi = {:.6g} <= 0 for unit xi = z2", form)});
            }
            bound = std::max(bound, coefficient_bound(z));
        } catch (const EvalError& err) {
            fail_eval(entry, z, err);
            break;
        }
        if (static_cast<int>(entry.witnesses.size()) >= kMaxWitnesses) break;
    }
    try {
        for (const Vec& d : ray_directions(spec.m)) {
            Vec seq;
            for (int k = 0; k < kRayDoublings; ++k) seq.push_back(coefficient_bound(scaled(d, box.half_width * std::ldexp(1.0, k))));
            if (diverges(seq)) {
                add_witness(entry, Witness{scaled(d, box.half_width * std::ldexp(1.0, kRayDoublings - 1)), {},
                                           "|K| + |e| grows without bound along the ray"});
            }
        }
    } catch (const EvalError& err) {
        fail_eval(entry, {}, err);
    }
    entry.estimates["c_ellipticity"] = c_ellip;
    entry.estimates["c_bound"] = bound;
    return entry;
}

A4Result check_A4(double nu, double p, double alpha, int N, A4Variant variant) {
    if (N < 1 || N > 3) return {false, fmt::format("spatial dimension N = {} not in 1..3", N)};
    if (!(nu > 0.0) || !(alpha > 0.0)) return {false, "nu and alpha must be positive"};
    if (p > nu) return {false, fmt::format("p = {} > nu = {}", p, nu)};
    if (alpha <= std::min(nu, 1.0)) return {true, fmt::format("case (i): 0 < alpha = {} <= min(nu, 1)", alpha)};
    const double branch = N == 1   ? (nu + 1.0) / 2.0
                          : N == 2 ? (3.0 * nu + 1.0) / (3.0 + nu)
                                   : nu + 2.0 - std::sqrt(nu * nu - nu + 3.0);
    const double trace_bound = variant == A4Variant::Literal ? (N + alpha + 1.0) / N : (N + nu + 1.0) / N;
    const bool ok = alpha > 1.0 && alpha < trace_bound && alpha < branch;
    if (ok) {
        return {true, fmt::format("case (ii): 1 < alpha = {} < {:.6g} and alpha < {:.6g}", alpha, trace_bound, branch)};
    }
    return {false, fmt::format("alpha = {} satisfies neither case (i) alpha <= {} nor case (ii) (1 < alpha < {:.6g}, "
                               "alpha < {:.6g})",
                               alpha, std::min(nu, 1.0), trace_bound, branch)};
}

CheckEntry check_growth(const ProblemSpec& spec, const SampleBox& box) {
    CheckEntry entry{"A3", fmt::format("|F| <= c(|z|^p + 1), |g| <= c(|z|^alpha + 1) with p = {}, alpha = {}", spec.p,
                                       spec.alpha),
                     Verdict::SampledPass, {}, {}};
    Rng rng(box.seed + 3);
    const double t_end = spec.solver.t_end;
    struct Term {
        const std::vector<Expr>* exprs;
        double power;
        const char* name;
    };
    const Term terms[] = {{&spec.F, spec.p, "F"}, {&spec.g, spec.alpha, "g"}};
    for (const Term& term : terms) {
        double sup = 0.0;
        const auto ratio = [&](const Vec& z, double x, double y, double t) {
            return norm(eval_all(*term.exprs, z, x, y, t)) / (std::pow(norm(z), term.power) + 1.0);
        };
        for (const Vec& z : box_samples(rng, spec.m, box)) {
            const double x = rng.uniform();
            const double y = spec.dim == 2 ? rng.uniform() : 0.0;
            const double t = rng.uniform(0.0, t_end);
            try {
                sup = std::max(sup, ratio(z, x, y, t));
            } catch (const EvalError& err) {
                fail_eval(entry, z, err);
                return entry;
            }
        }
        const double probes[][3] = {{0.5, 0.5, 0.0}, {0.25, 0.75, 0.5 * t_end}, {1.0, 1.0, t_end}};
        for (const Vec& d : ray_directions(spec.m)) {
            for (const auto& probe : probes) {
                Vec seq;
                try {
                    for (int k = 0; k < kRayDoublings; ++k) {
                        const Vec z = scaled(d, box.half_width * std::ldexp(1.0, k));
                        seq.push_back(ratio(z, probe[0], spec.dim == 2 ? probe[1] : 0.0, probe[2]));
                    }
                } catch (const EvalError& err) {
                    fail_eval(entry, d, err);
                    return entry;
                }
                if (diverges(seq)) {
                    add_witness(entry, Witness{scaled(d, box.half_width * std::ldexp(1.0, kRayDoublings - 1)), {},
                                               fmt::format("|{}|/(|z|^{} + 1) diverges along the ray (x = {}, t = {})",
                                                           term.name, term.power, probe[0], probe[2])});
                    break;
                }
            }
        }
        entry.estimates[fmt::format("c_{}", term.name)] = sup;
    }
    return entry;
}

std::vector<CheckEntry> check_uniqueness(const ProblemSpec& spec, const SampleBox& box) {
    const int m = spec.m;
    CheckEntry diag{"uniq-diagonal", "K diagonal with K^j depending on u_j only", Verdict::SampledPass, {}, {}};
    CheckEntry bounds{"uniq-bounds", "c1 <= K^j(xi) <= c2", Verdict::SampledPass, {}, {}};
    CheckEntry lip{"uniq-lipschitz", "K^j, e^j, F^j, g^j Lipschitz in u", Verdict::SampledPass, {}, {}};
    Rng rng(box.seed + 4);

    for (const Vec& z : box_samples(rng, m, box)) {
        try {
            const Eigen::MatrixXd K = eval_K(spec, z);
            for (int j = 0; j < m; ++j) {
                for (int i = 0; i < m; ++i) {
                    if (i != j && K(j, i) != 0.0) {
                        add_witness(diag, Witness{z, {}, fmt::format("K{}{} = {:.6g} != 0", j + 1, i + 1, K(j, i))});
                    }
                }
                // Replace the other components and compare.
                const Vec own = axis_point(m, j, z[static_cast<std::size_t>(j)]);
                const double kz = K(j, j);
                const double kown = spec.K_at(j, j).evaluate(EvalPoint<double>{own});
                if (std::abs(kz - kown) > 1e-12 * (1.0 + std::abs(kz))) {
                    add_witness(diag, Witness{z, own, fmt::format("K{0}{0} changes with u_i, i != {0}", j + 1)});
                }
            }
        } catch (const EvalError& err) {
            fail_eval(diag, z, err);
            break;
        }
        if (static_cast<int>(diag.witnesses.size()) >= kMaxWitnesses) break;
    }

    // Scalar samples of K^j(xi) over [-w, w] plus rays, used for bounds and the K Lipschitz constant.
    Vec xis;
    for (int s = 0; s <= box.samples; ++s) xis.push_back(-box.half_width + 2.0 * box.half_width * s / box.samples);
    double c1 = std::numeric_limits<double>::infinity();
    double c2 = 0.0;
    double lip_k = 0.0;
    for (int j = 0; j < m; ++j) {
        const Expr& K = spec.K_at(j, j);
        const auto k_of = [&](double xi) { return K.evaluate(EvalPoint<double>{axis_point(m, j, xi)}); };
        try {
            double prev = k_of(xis.front());
            for (std::size_t s = 0; s < xis.size(); ++s) {
                const double k = k_of(xis[s]);
                if (!(k > 0.0)) add_witness(bounds, Witness{axis_point(m, j, xis[s]), {}, fmt::format("K{0}{0} = {1:.6g} <= 0", j + 1, k)});
                c1 = std::min(c1, k);
                c2 = std::max(c2, k);
                if (s > 0) lip_k = std::max(lip_k, std::abs(k - prev) / (xis[s] - xis[s - 1]));
                prev = k;
            }
            for (double sign : {1.0, -1.0}) {
                Vec vals;
                Vec slopes;
                for (int k = 0; k < kRayDoublings; ++k) {
                    const double r = sign * box.half_width * std::ldexp(1.0, k);
                    const double h = 1e-3 * std::abs(r);
                    vals.push_back(std::abs(k_of(r)));
                    slopes.push_back(std::abs(k_of(r + h) - k_of(r - h)) / (2.0 * h));
                    if (!(k_of(r) > 0.0)) {
                        add_witness(bounds, Witness{axis_point(m, j, r), {}, fmt::format("K{0}{0} <= 0 on the ray", j + 1)});
                    }
                }
                if (diverges(vals)) add_witness(bounds, Witness{axis_point(m, j, sign * box.half_width * 512.0), {}, fmt::format("K{0}{0} unbounded", j + 1)});
                if (diverges(slopes)) add_witness(lip, Witness{axis_point(m, j, sign * box.half_width * 512.0), {}, fmt::format("K{0}{0} not Lipschitz", j + 1)});
            }
        } catch (const EvalError& err) {
            fail_eval(bounds, {}, err);
        }
    }
    bounds.estimates["c1"] = c1;
    bounds.estimates["c2"] = c2;

    // Difference quotients of e, F, g on random pairs and near-pairs.
    double lip_rest = 0.0;
    const double t_end = spec.solver.t_end;
    const std::pair<const std::vector<Expr>*, const char*> fields[] = {{&spec.e, "e"}, {&spec.F, "F"}, {&spec.g, "g"}};
    for (const auto& [exprs, name] : fields) {
        for (int s = 0; s < box.samples; ++s) {
            const Vec z1 = random_point(rng, m, box.half_width);
            Vec z2 = z1;
            if (s % 2 == 0) {
                z2 = random_point(rng, m, box.half_width);
            } else {
                for (auto& v : z2) v += rng.uniform(-1e-3, 1e-3);
            }
            const double x = rng.uniform();
            const double y = spec.dim == 2 ? rng.uniform() : 0.0;
            const double t = rng.uniform(0.0, t_end);
            try {
                const Vec a = eval_all(*exprs, z1, x, y, t);
                const Vec b = eval_all(*exprs, z2, x, y, t);
                Vec diff(a.size());
                for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
                Vec dz(z1.size());
                for (std::size_t k = 0; k < z1.size(); ++k) dz[k] = z1[k] - z2[k];
                lip_rest = std::max(lip_rest, norm(diff) / norm(dz));
            } catch (const EvalError& err) {
                fail_eval(lip, z1, err);
                break;
            }
        }
        try {
            for (const Vec& d : ray_directions(m)) {
                Vec slopes;
                for (int k = 0; k < kRayDoublings; ++k) {
                    const double r = box.half_width * std::ldexp(1.0, k);
                    const Vec zp = scaled(d, r * (1.0 + 1e-3));
                    const Vec zm = scaled(d, r * (1.0 - 1e-3));
                    const Vec a = eval_all(*exprs, zp, 0.5, 0.5, 0.5 * t_end);
                    const Vec b = eval_all(*exprs, zm, 0.5, 0.5, 0.5 * t_end);
                    Vec diff(a.size());
                    for (std::size_t q = 0; q < a.size(); ++q) diff[q] = a[q] - b[q];
                    slopes.push_back(norm(diff) / (2e-3 * r));
                }
                if (diverges(slopes)) {
                    add_witness(lip, Witness{scaled(d, box.half_width * 512.0), {}, fmt::format("{} not Lipschitz along the ray", name)});
                    break;
                }
            }
        } catch (const EvalError& err) {
            fail_eval(lip, {}, err);
        }
    }
    lip.estimates["C_L"] = std::max(lip_k, lip_rest);
    return {diag, bounds, lip};
}

CheckEntry check_initial(const ProblemSpec& spec, const Mesh& mesh) {
    CheckEntry entry{"A5", "u0 finite at nodes, Psi(u0) and u0.B(u0) finite on every element", Verdict::Pass, {}, {}};
    const int m = spec.m;
    const auto eval_u0 = [&](const Point& x) {
        Vec z(static_cast<std::size_t>(m));
        const EvalPoint<double> pt{{}, x[0], x[1], 0.0};
        for (int j = 0; j < m; ++j) z[static_cast<std::size_t>(j)] = spec.u0[static_cast<std::size_t>(j)].evaluate(pt);
        return z;
    };
    double psi_integral = 0.0;
    double ub_integral = 0.0;
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        const Point& x = mesh.node(n);
        try {
            const Vec z = eval_u0(x);
            const double psi = legendre_psi(spec, z);
            const Vec b = eval_all(spec.B, z);
            double ub = 0.0;
            for (int j = 0; j < m; ++j) ub += z[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(j)];
            psi_integral += mesh.lumped_weights()[n] * psi;
            ub_integral += mesh.lumped_weights()[n] * ub;
        } catch (const EvalError& err) {
            add_witness(entry, Witness{{x[0], x[1]}, {}, fmt::format("at node {}: {}", n, err.what())});
        }
    }
    // Element interiors.
    for (std::size_t e = 0; e < mesh.num_elements() && entry.verdict != Verdict::Fail; ++e) {
        const auto& el = mesh.elements()[e];
        const int nv = mesh.nodes_per_element();
        const auto check_at = [&](const Point& x) {
            try {
                const Vec z = eval_u0(x);
                (void)legendre_psi(spec, z);
            } catch (const EvalError& err) {
                add_witness(entry, Witness{{x[0], x[1]}, {}, fmt::format("in element {}: {}", e, err.what())});
            }
        };
        if (nv == 2) {
            for (const auto& bary : segment_rule3().points) {
                const Point& a = mesh.node(static_cast<std::size_t>(el[0]));
                const Point& b = mesh.node(static_cast<std::size_t>(el[1]));
                check_at({bary[0] * a[0] + bary[1] * b[0], 0.0});
            }
        } else {
            for (const auto& bary : triangle_rule3().points) {
                Point x{0.0, 0.0};
                for (int k = 0; k < 3; ++k) {
                    const Point& v = mesh.node(static_cast<std::size_t>(el[static_cast<std::size_t>(k)]));
                    x[0] += bary[static_cast<std::size_t>(k)] * v[0];
                    x[1] += bary[static_cast<std::size_t>(k)] * v[1];
                }
                check_at(x);
            }
        }
    }
    entry.estimates["psi_u0_integral"] = psi_integral;
    entry.estimates["u0_dot_B_integral"] = ub_integral;
    return entry;
}

ValidationReport validate(const ProblemSpec& spec, const Mesh& mesh) {
    const SampleBox box = SampleBox::from(spec);
    ValidationReport report;
    report.entries.push_back(check_monotone_gradient(spec, box));
    report.entries.push_back(check_psi_coercive(spec, box));
    report.entries.push_back(check_K_pd_bounded(spec, box));
    report.entries.push_back(check_growth(spec, box));
    {
        const A4Result a4 = check_A4(spec.nu, spec.p, spec.alpha, spec.dim);
        CheckEntry entry{"A4", a4.reason, a4.ok ? Verdict::Pass : Verdict::Fail, {}, {}};
        if (!a4.ok) entry.witnesses.push_back(Witness{{spec.nu, spec.p, spec.alpha, double(spec.dim)}, {}, "(nu, p, alpha, N)"});
        const A4Result alt = check_A4(spec.nu, spec.p, spec.alpha, spec.dim, A4Variant::NuBound);
        entry.estimates["nu_bound_variant_ok"] = alt.ok ? 1.0 : 0.0;
        report.entries.push_back(std::move(entry));
    }
    report.entries.push_back(check_initial(spec, mesh));
    if (spec.uniqueness_mode) {
        for (auto& e : check_uniqueness(spec, box)) report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace dnpvi
