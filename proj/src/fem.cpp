#include "dnpvi/fem.hpp"

#include "dnpvi/error.hpp"
#include "dnpvi/quadrature.hpp"
#include "dnpvi/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace dnpvi {

DofMap::DofMap(const Mesh& mesh, int m)
    : m_(m), free_index_(mesh.num_nodes() * static_cast<std::size_t>(m), -1), dirichlet_node_(mesh.num_nodes(), false) {
    for (int node : mesh.tagged_nodes(BoundaryTag::Dirichlet)) dirichlet_node_[static_cast<std::size_t>(node)] = true;
    for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
        if (dirichlet_node_[node]) continue;
        for (int c = 0; c < m; ++c) {
            const int dof = static_cast<int>(node) * m + c;
            free_index_[static_cast<std::size_t>(dof)] = static_cast<int>(free_.size());
            free_.push_back(dof);
        }
    }
}

Assembler::Assembler(const ProblemSpec& spec, const Mesh& mesh)
    : spec_(&spec), mesh_(&mesh), dofs_(mesh, spec.m) {
    if (mesh.dim() != spec.dim) throw InvalidArgument("mesh dimension does not match the problem");
    for (int node : mesh.tagged_nodes(BoundaryTag::Unilateral)) {
        if (dofs_.is_dirichlet_node(node)) continue;
        for (int c = 0; c < spec.m; ++c) {
            if (spec.constrained[static_cast<std::size_t>(c)]) constrained_.push_back(node * spec.m + c);
        }
    }
}

namespace {

template <class Scalar>
double val(const Scalar& s) {
    return value_of(s);
}

template <class Scalar>
double grad(const Scalar& s, int k) {
    if constexpr (std::is_same_v<Scalar, Dual>) {
        return s.d[static_cast<std::size_t>(k)];
    } else {
        (void)s;
        (void)k;
        return 0.0;
    }
}

template <class Scalar>
Scalar seed_component(double value, int component) {
    if constexpr (std::is_same_v<Scalar, Dual>) {
        return Dual::variable(value, component);
    } else {
        (void)component;
        return value;
    }
}

[[noreturn]] void rethrow_at(const EvalError& err, std::string_view where) {
    throw EvalError(fmt::format("{} while assembling {}", err.what(), where));
}

/// Local gather: barycentric coordinates -> point and u values.
struct LocalPoint {
    Point x{0.0, 0.0};
    std::array<double, kMaxComponents> u{};
};

}  // namespace

template <class Scalar>
void Assembler::assemble(const StateField& u_new, const StateField& u_old, double dt, double eps, double t,
                         WeakFormTerms* terms, Eigen::VectorXd* full, SparseMatrix* jacobian) const {
    constexpr bool kJac = std::is_same_v<Scalar, Dual>;
    const ProblemSpec& spec = *spec_;
    const Mesh& mesh = *mesh_;
    const int m = spec.m;
    const int dim = mesh.dim();
    const auto n_dofs = static_cast<Eigen::Index>(dofs_.num_dofs());
    if (u_new.values.size() != n_dofs || u_old.values.size() != n_dofs) {
        throw InvalidArgument("assemble: state size does not match mesh and component count");
    }
    if (!(dt > 0.0) || !(eps > 0.0)) throw InvalidArgument("assemble: dt and eps must be positive");
    const double inv_eps = std::isinf(eps) ? 0.0 : 1.0 / eps;

    enum Term { kParabolic, kStiffness, kConvection, kLoad, kBoundary, kPenalty, kNumTerms };
    std::array<Eigen::VectorXd, kNumTerms> parts;
    for (auto& p : parts) p = Eigen::VectorXd::Zero(n_dofs);
    std::vector<Eigen::Triplet<double>> triplets;

    const auto add_jac = [&](int row_dof, int col_dof, double v) {
        if constexpr (kJac) {
            const int r = dofs_.free_index(row_dof);
            const int c = dofs_.free_index(col_dof);
            if (r >= 0 && c >= 0 && v != 0.0) triplets.emplace_back(r, c, v);
        }
    };

    std::array<Scalar, kMaxComponents> uq{};
    const auto point_of = [&](std::span<const Scalar> u, double x, double y) {
        return EvalPoint<Scalar>{u, x, y, t};
    };

    // Lumped parabolic term.
    {
        const auto& w = mesh.lumped_weights();
        std::array<double, kMaxComponents> old{};
        for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
            for (int c = 0; c < m; ++c) {
                uq[static_cast<std::size_t>(c)] = seed_component<Scalar>(u_new(node, c), c);
                old[static_cast<std::size_t>(c)] = u_old(node, c);
            }
            const std::span<const Scalar> us(uq.data(), static_cast<std::size_t>(m));
            const std::span<const double> olds(old.data(), static_cast<std::size_t>(m));
            try {
                for (int j = 0; j < m; ++j) {
                    const Scalar b_new = spec.B[static_cast<std::size_t>(j)].evaluate(point_of(us, 0.0, 0.0));
                    const double b_old = spec.B[static_cast<std::size_t>(j)].evaluate(EvalPoint<double>{olds});
                    const int row = static_cast<int>(node) * m + j;
                    parts[kParabolic][row] += w[node] * (val(b_new) - b_old) / dt;
                    for (int k = 0; k < m; ++k) add_jac(row, static_cast<int>(node) * m + k, w[node] * grad(b_new, k) / dt);
                }
            } catch (const EvalError& err) {
                rethrow_at(err, fmt::format("B at node {}", node));
            }
        }
    }

    // Element integrals: stiffness, convection, load.
    const int nv = mesh.nodes_per_element();
    std::vector<Scalar> Kq(static_cast<std::size_t>(m * m));
    std::vector<Scalar> eq(static_cast<std::size_t>(m * dim));
    std::vector<Scalar> Fq(static_cast<std::size_t>(m));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements()[e];
        const double vol = mesh.element_volume(e);
        const auto grads = mesh.basis_gradients(e);
        // grad u^i (constant on the element)
        std::array<Point, kMaxComponents> gu{};
        for (int i = 0; i < m; ++i) {
            for (int a = 0; a < nv; ++a) {
                const double ua = u_new(static_cast<std::size_t>(el[static_cast<std::size_t>(a)]), i);
                gu[static_cast<std::size_t>(i)][0] += ua * grads[static_cast<std::size_t>(a)][0];
                gu[static_cast<std::size_t>(i)][1] += ua * grads[static_cast<std::size_t>(a)][1];
            }
        }
        const auto process = [&](std::span<const double> bary, double weight) {
            Point x{0.0, 0.0};
            for (int a = 0; a < nv; ++a) {
                const Point& v = mesh.node(static_cast<std::size_t>(el[static_cast<std::size_t>(a)]));
                x[0] += bary[static_cast<std::size_t>(a)] * v[0];
                x[1] += bary[static_cast<std::size_t>(a)] * v[1];
            }
            for (int c = 0; c < m; ++c) {
                double uc = 0.0;
                for (int a = 0; a < nv; ++a) {
                    uc += bary[static_cast<std::size_t>(a)] * u_new(static_cast<std::size_t>(el[static_cast<std::size_t>(a)]), c);
                }
                uq[static_cast<std::size_t>(c)] = seed_component<Scalar>(uc, c);
            }
            const std::span<const Scalar> us(uq.data(), static_cast<std::size_t>(m));
            const EvalPoint<Scalar> pt = point_of(us, x[0], x[1]);
            try {
                for (std::size_t k = 0; k < Kq.size(); ++k) Kq[k] = spec.K[k].evaluate(pt);
                for (std::size_t k = 0; k < eq.size(); ++k) eq[k] = spec.e[k].evaluate(pt);
                for (std::size_t k = 0; k < Fq.size(); ++k) Fq[k] = spec.F[k].evaluate(pt);
            } catch (const EvalError& err) {
                rethrow_at(err, fmt::format("element {} at quadrature point ({:.6g}, {:.6g})", e, x[0], x[1]));
            }
            const double wq = weight * vol;
            for (int j = 0; j < m; ++j) {
                Point kflux{0.0, 0.0};
                for (int i = 0; i < m; ++i) {
                    const double kji = val(Kq[static_cast<std::size_t>(j * m + i)]);
                    kflux[0] += kji * gu[static_cast<std::size_t>(i)][0];
                    kflux[1] += kji * gu[static_cast<std::size_t>(i)][1];
                }
                Point eflux{0.0, 0.0};
                for (int d = 0; d < dim; ++d) eflux[static_cast<std::size_t>(d)] = val(eq[static_cast<std::size_t>(j * dim + d)]);
                const double f = val(Fq[static_cast<std::size_t>(j)]);
                for (int a = 0; a < nv; ++a) {
                    const Point& ga = grads[static_cast<std::size_t>(a)];
                    const int row = el[static_cast<std::size_t>(a)] * m + j;
                    parts[kStiffness][row] += wq * (kflux[0] * ga[0] + kflux[1] * ga[1]);
                    parts[kConvection][row] += wq * (eflux[0] * ga[0] + eflux[1] * ga[1]);
                    parts[kLoad][row] -= wq * f * bary[static_cast<std::size_t>(a)];
                    if constexpr (kJac) {
                        for (int b = 0; b < nv; ++b) {
                            const Point& gb = grads[static_cast<std::size_t>(b)];
                            const double lb = bary[static_cast<std::size_t>(b)];
                            for (int k = 0; k < m; ++k) {
                                double v = val(Kq[static_cast<std::size_t>(j * m + k)]) * (gb[0] * ga[0] + gb[1] * ga[1]);
                                for (int i = 0; i < m; ++i) {
                                    const Point& gi = gu[static_cast<std::size_t>(i)];
                                    v += grad(Kq[static_cast<std::size_t>(j * m + i)], k) * lb * (gi[0] * ga[0] + gi[1] * ga[1]);
                                }
                                for (int d = 0; d < dim; ++d) {
                                    v += grad(eq[static_cast<std::size_t>(j * dim + d)], k) * lb * ga[static_cast<std::size_t>(d)];
                                }
                                v -= grad(Fq[static_cast<std::size_t>(j)], k) * lb * bary[static_cast<std::size_t>(a)];
                                add_jac(row, el[static_cast<std::size_t>(b)] * m + k, wq * v);
                            }
                        }
                    }
                }
            }
        };
        if (dim == 1) {
            const auto& rule = segment_rule3();
            for (std::size_t q = 0; q < rule.weights.size(); ++q) process(rule.points[q], rule.weights[q]);
        } else {
            const auto& rule = triangle_rule3();
            for (std::size_t q = 0; q < rule.weights.size(); ++q) process(rule.points[q], rule.weights[q]);
        }
    }

    // Facet integrals: Neumann data and penalty.
    const bool want_g = spec.has_neumann_data();
    const bool want_penalty = inv_eps > 0.0 && spec.any_constrained();
    for (std::size_t f = 0; f < mesh.facets().size(); ++f) {
        const BoundaryFacet& facet = mesh.facets()[f];
        const bool neumann = facet.tag == BoundaryTag::Neumann && want_g;
        const bool unilateral = facet.tag == BoundaryTag::Unilateral && want_penalty;
        if (!neumann && !unilateral) continue;
        const double measure = mesh.facet_measure(f);
        const int nf = mesh.nodes_per_facet();
        const auto process = [&](std::span<const double> bary, double weight) {
            Point x{0.0, 0.0};
            for (int a = 0; a < nf; ++a) {
                const Point& v = mesh.node(static_cast<std::size_t>(facet.nodes[static_cast<std::size_t>(a)]));
                x[0] += bary[static_cast<std::size_t>(a)] * v[0];
                x[1] += bary[static_cast<std::size_t>(a)] * v[1];
            }
            for (int c = 0; c < m; ++c) {
                double uc = 0.0;
                for (int a = 0; a < nf; ++a) {
                    uc += bary[static_cast<std::size_t>(a)] * u_new(static_cast<std::size_t>(facet.nodes[static_cast<std::size_t>(a)]), c);
                }
                uq[static_cast<std::size_t>(c)] = seed_component<Scalar>(uc, c);
            }
            const double wq = weight * measure;
            if (neumann) {
                const std::span<const Scalar> us(uq.data(), static_cast<std::size_t>(m));
                for (int j = 0; j < m; ++j) {
                    Scalar gval{};
                    try {
                        gval = spec.g[static_cast<std::size_t>(j)].evaluate(point_of(us, x[0], x[1]));
                    } catch (const EvalError& err) {
                        rethrow_at(err, fmt::format("g on facet {}", f));
                    }
                    for (int a = 0; a < nf; ++a) {
                        const int row = facet.nodes[static_cast<std::size_t>(a)] * m + j;
                        const double la = bary[static_cast<std::size_t>(a)];
                        parts[kBoundary][row] -= wq * val(gval) * la;
                        if constexpr (kJac) {
                            for (int b = 0; b < nf; ++b) {
                                for (int k = 0; k < m; ++k) {
                                    add_jac(row, facet.nodes[static_cast<std::size_t>(b)] * m + k,
                                            -wq * grad(gval, k) * bary[static_cast<std::size_t>(b)] * la);
                                }
                            }
                        }
                    }
                }
            }
            if (unilateral) {
                for (int j = 0; j < m; ++j) {
                    if (!spec.constrained[static_cast<std::size_t>(j)]) continue;
                    const double uj = val(uq[static_cast<std::size_t>(j)]);
                    const double plus = std::max(uj, 0.0);
                    const double heaviside = uj > 0.0 ? 1.0 : 0.0;
                    for (int a = 0; a < nf; ++a) {
                        const int row = facet.nodes[static_cast<std::size_t>(a)] * m + j;
                        const double la = bary[static_cast<std::size_t>(a)];
                        parts[kPenalty][row] += inv_eps * wq * plus * la;
                        if (heaviside > 0.0) {
                            for (int b = 0; b < nf; ++b) {
                                add_jac(row, facet.nodes[static_cast<std::size_t>(b)] * m + j,
                                        inv_eps * wq * bary[static_cast<std::size_t>(b)] * la);
                            }
                        }
                    }
                }
            }
        };
        if (nf == 1) {
            static constexpr double kPoint[] = {1.0};
            process(kPoint, 1.0);
        } else {
            const auto& rule = segment_rule3();
            for (std::size_t q = 0; q < rule.weights.size(); ++q) process(rule.points[q], rule.weights[q]);
        }
    }

    if (full != nullptr) {
        *full = parts[kParabolic] + parts[kStiffness] + parts[kConvection] + parts[kLoad] + parts[kBoundary];
    }
    if (terms != nullptr) {
        const auto& fd = dofs_.free_dofs();
        const auto n_free = static_cast<Eigen::Index>(fd.size());
        terms->free_dofs = fd;
        Eigen::VectorXd* outs[] = {&terms->parabolic, &terms->stiffness, &terms->convection,
                                   &terms->load,      &terms->boundary,  &terms->penalty};
        for (int p = 0; p < kNumTerms; ++p) {
            outs[p]->resize(n_free);
            for (Eigen::Index i = 0; i < n_free; ++i) (*outs[p])[i] = parts[static_cast<std::size_t>(p)][fd[static_cast<std::size_t>(i)]];
        }
        terms->residual = terms->parabolic + terms->stiffness + terms->convection + terms->load + terms->boundary +
                          terms->penalty;
    }
    if constexpr (kJac) {
        if (jacobian != nullptr) {
            const auto n_free = static_cast<Eigen::Index>(dofs_.num_free());
            jacobian->resize(n_free, n_free);
            jacobian->setFromTriplets(triplets.begin(), triplets.end());
        }
    }
}

WeakFormTerms Assembler::residual(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                  double t) const {
    WeakFormTerms terms;
    assemble<double>(u_new, u_old, dt, eps, t, &terms, nullptr, nullptr);
    return terms;
}

SparseMatrix Assembler::jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                 double t) const {
    SparseMatrix J;
    assemble<Dual>(u_new, u_old, dt, eps, t, nullptr, nullptr, &J);
    return J;
}

void Assembler::residual_and_jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                      double t, Eigen::VectorXd& residual, SparseMatrix& jacobian) const {
    WeakFormTerms terms;
    assemble<Dual>(u_new, u_old, dt, eps, t, &terms, nullptr, &jacobian);
    residual = std::move(terms.residual);
}

Eigen::VectorXd Assembler::full_residual(const StateField& u_new, const StateField& u_old, double dt,
                                         double t) const {
    Eigen::VectorXd full;
    assemble<double>(u_new, u_old, dt, kNoPenalty, t, nullptr, &full, nullptr);
    return full;
}

PenaltyForm Assembler::penalty_form(const StateField& u) const {
    const ProblemSpec& spec = *spec_;
    const Mesh& mesh = *mesh_;
    const int m = spec.m;
    PenaltyForm out;
    out.values = Eigen::VectorXd::Zero(u.values.size());
    for (std::size_t f = 0; f < mesh.facets().size(); ++f) {
        const BoundaryFacet& facet = mesh.facets()[f];
        if (facet.tag != BoundaryTag::Unilateral) continue;
        const double measure = mesh.facet_measure(f);
        const auto process = [&](std::span<const double> bary, double weight) {
            for (int j = 0; j < m; ++j) {
                if (!spec.constrained[static_cast<std::size_t>(j)]) continue;
                double uj = 0.0;
                for (int a = 0; a < mesh.nodes_per_facet(); ++a) {
                    uj += bary[static_cast<std::size_t>(a)] * u(static_cast<std::size_t>(facet.nodes[static_cast<std::size_t>(a)]), j);
                }
                const double plus = std::max(uj, 0.0);
                for (int a = 0; a < mesh.nodes_per_facet(); ++a) {
                    out.values[facet.nodes[static_cast<std::size_t>(a)] * m + j] += weight * measure * plus * bary[static_cast<std::size_t>(a)];
                }
            }
        };
        if (mesh.nodes_per_facet() == 1) {
            static constexpr double kPoint[] = {1.0};
            process(kPoint, 1.0);
        } else {
            const auto& rule = segment_rule3();
            for (std::size_t q = 0; q < rule.weights.size(); ++q) process(rule.points[q], rule.weights[q]);
        }
    }
    out.pairing = out.values.dot(u.values);
    return out;
}

void Assembler::apply_dirichlet(StateField& u, double t) const {
    const ProblemSpec& spec = *spec_;
    const Mesh& mesh = *mesh_;
    for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
        if (!dofs_.is_dirichlet_node(static_cast<int>(node))) continue;
        for (int c = 0; c < spec.m; ++c) {
            double value = 0.0;
            if (spec.dirichlet) {
                const Point& x = mesh.node(node);
                try {
                    value = (*spec.dirichlet)[static_cast<std::size_t>(c)].evaluate(EvalPoint<double>{{}, x[0], x[1], t});
                } catch (const EvalError& err) {
                    rethrow_at(err, fmt::format("Dirichlet data at node {}", node));
                }
            }
            u(node, c) = value;
        }
    }
}

PenaltyForm penalty_form(const StateField& u, const Mesh& mesh, const ProblemSpec& spec) {
    return Assembler(spec, mesh).penalty_form(u);
}

WeakFormTerms assemble_residual(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                const ProblemSpec& spec, const Mesh& mesh, double t) {
    return Assembler(spec, mesh).residual(u_new, u_old, dt, eps, t);
}

SparseMatrix assemble_jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps,
                               const ProblemSpec& spec, const Mesh& mesh, double t) {
    return Assembler(spec, mesh).jacobian(u_new, u_old, dt, eps, t);
}

Eigen::VectorXd recover_flux(const StateField& u_new, const StateField& u_old, double dt, const ProblemSpec& spec,
                             const Mesh& mesh, double t) {
    const Assembler assembler(spec, mesh);
    const Eigen::VectorXd full = assembler.full_residual(u_new, u_old, dt, t);
    const auto& dofs = assembler.constrained_dofs();
    Eigen::VectorXd flux(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) flux[static_cast<Eigen::Index>(i)] = full[dofs[i]];
    return flux;
}

double vi_gap(const Trajectory& traj, const TestTrajectory& phi, const ProblemSpec& spec, const Mesh& mesh) {
    if (phi.size() != traj.size()) throw InvalidArgument("vi_gap: test function and trajectory lengths differ");
    const Assembler assembler(spec, mesh);
    for (std::size_t n = 1; n < phi.size(); ++n) {
        for (int dof : assembler.constrained_dofs()) {
            if (phi[n].values[dof] > 0.0) {
                throw InvalidArgument(fmt::format("vi_gap: test function violates the sign constraint at dof {} "
                                                  "(level {}, value {:.3g})",
                                                  dof, n, phi[n].values[dof]));
            }
        }
    }
    double total = 0.0;
    for (std::size_t n = 1; n < traj.size(); ++n) {
        const double dt = traj.time(n) - traj.time(n - 1);
        const Eigen::VectorXd r = assembler.full_residual(traj.states[n], traj.states[n - 1], dt, traj.time(n));
        double level = 0.0;
        for (int dof : assembler.dofs().free_dofs()) level += r[dof] * (phi[n].values[dof] - traj.states[n].values[dof]);
        total += dt * level;
    }
    return total;
}

double vi_residual(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh,
                   std::span<const TestTrajectory> bank) {
    if (bank.empty()) throw InvalidArgument("vi_residual: empty test bank");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& phi : bank) best = std::min(best, vi_gap(traj, phi, spec, mesh));
    return best;
}

std::vector<TestTrajectory> make_feasible_bank(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh,
                                               int count, double amplitude, std::uint64_t seed) {
    const Assembler assembler(spec, mesh);
    std::vector<TestTrajectory> bank;
    bank.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Rng rng = Rng::split(seed, static_cast<std::uint64_t>(k));
        TestTrajectory phi = traj.states;
        for (std::size_t n = 1; n < phi.size(); ++n) {
            for (int dof : assembler.dofs().free_dofs()) phi[n].values[dof] += amplitude * rng.uniform(-1.0, 1.0);
            for (int dof : assembler.constrained_dofs()) phi[n].values[dof] = std::min(phi[n].values[dof], 0.0);
        }
        bank.push_back(std::move(phi));
    }
    return bank;
}

double l2_norm(const Mesh& mesh, const StateField& u) {
    // Exact for P1: element mass matrix |E|/((d+1)(d+2)) (1 + delta_ab).
    double total = 0.0;
    const int nv = mesh.nodes_per_element();
    const double denom = nv * (nv + 1);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements()[e];
        const double vol = mesh.element_volume(e);
        for (int c = 0; c < u.m; ++c) {
            double sum = 0.0;
            double sq = 0.0;
            for (int a = 0; a < nv; ++a) {
                const double v = u(static_cast<std::size_t>(el[static_cast<std::size_t>(a)]), c);
                sum += v;
                sq += v * v;
            }
            total += vol / denom * (sq + sum * sum);
        }
    }
    return std::sqrt(std::max(total, 0.0));
}

double h1_seminorm_squared(const Mesh& mesh, const StateField& u) {
    double total = 0.0;
    const int nv = mesh.nodes_per_element();
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements()[e];
        const auto grads = mesh.basis_gradients(e);
        for (int c = 0; c < u.m; ++c) {
            Point g{0.0, 0.0};
            for (int a = 0; a < nv; ++a) {
                const double v = u(static_cast<std::size_t>(el[static_cast<std::size_t>(a)]), c);
                g[0] += v * grads[static_cast<std::size_t>(a)][0];
                g[1] += v * grads[static_cast<std::size_t>(a)][1];
            }
            total += mesh.element_volume(e) * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    return total;
}

}  // namespace dnpvi
