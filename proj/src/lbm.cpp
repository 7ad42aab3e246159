#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "anvil/flow.hpp"
#include "anvil/parallel.hpp"

namespace anvil {

namespace {

// D3Q19 velocity set.
constexpr int kQ = 19;
constexpr int kCx[kQ] = {0, 1, -1, 0, 0, 0, 0, 1, -1, 1, -1, 1, -1, 1, -1, 0, 0, 0, 0};
constexpr int kCy[kQ] = {0, 0, 0, 1, -1, 0, 0, 1, -1, -1, 1, 0, 0, 0, 0, 1, -1, 1, -1};
constexpr int kCz[kQ] = {0, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, 1, -1, -1, 1, 1, -1, -1, 1};
constexpr double kW0 = 1.0 / 3.0, kW1 = 1.0 / 18.0, kW2 = 1.0 / 36.0;
constexpr double kW[kQ] = {kW0, kW1, kW1, kW1, kW1, kW1, kW1, kW2, kW2, kW2,
                           kW2, kW2, kW2, kW2, kW2, kW2, kW2, kW2, kW2};

struct Tables {
    int opp[kQ];
    int mirror[3][kQ];

    Tables() {
        for (int i = 0; i < kQ; ++i) {
            auto find = [&](int x, int y, int z) {
                for (int j = 0; j < kQ; ++j) {
                    if (kCx[j] == x && kCy[j] == y && kCz[j] == z) return j;
                }
                return -1;
            };
            opp[i] = find(-kCx[i], -kCy[i], -kCz[i]);
            mirror[0][i] = find(-kCx[i], kCy[i], kCz[i]);
            mirror[1][i] = find(kCx[i], -kCy[i], kCz[i]);
            mirror[2][i] = find(kCx[i], kCy[i], -kCz[i]);
        }
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

double feq(int i, double rho, double ux, double uy, double uz) {
    double eu = kCx[i] * ux + kCy[i] * uy + kCz[i] * uz;
    double usq = ux * ux + uy * uy + uz * uz;
    return kW[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq);
}

struct Kahan {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

struct Scaling {
    double dt_s = 0.0;
    double tau = 0.0;
    double u_lat = 0.0;
};

Scaling choose_scaling(double speed_scale, double nu, double dx, const LbmOptions& opts) {
    // tau(u) = 3 nu u / (U dx) + 1/2, monotone in the lattice velocity.
    auto tau_of = [&](double u) { return 3.0 * nu * u / (speed_scale * dx) + 0.5; };
    double u = opts.target_lattice_u;
    if (tau_of(u) > opts.tau_max) {
        u = std::max(1e-4, (1.2 - 0.5) * speed_scale * dx / (3.0 * nu));
    } else if (tau_of(u) < opts.tau_min + 0.01) {
        u = (opts.tau_min + 0.03 - 0.5) * speed_scale * dx / (3.0 * nu);
    }
    if (u > opts.max_lattice_u) {
        std::ostringstream os;
        os << "cell Reynolds number " << speed_scale * dx / nu
           << " too high for the internal solver; refine the mesh or lower the speed";
        throw Error(Err::Unstable, os.str());
    }
    double tau = tau_of(u);
    if (!(tau > opts.tau_min) || !(tau < opts.tau_max)) {
        std::ostringstream os;
        os << "lattice relaxation time " << tau << " outside the stable range ("
           << opts.tau_min << ", " << opts.tau_max << ")";
        throw Error(Err::Unstable, os.str());
    }
    return {u * dx / speed_scale, tau, u};
}

} // namespace

struct LbmState {
    VoxelDomain domain;
    std::vector<double> f; // 19 * N, direction-major
    std::vector<double> ux, uy, uz, rho;
    double tau = 1.0;
    double u_lat = 0.0;
    double dt_s = 0.0;
    double rho_phys = 1.0;
    Vec3 accel_lat;

    std::size_t N() const { return domain.count(); }
};

namespace {

/// One collision update for cell `idx`; returns nothing but refreshes the
/// macroscopic arrays. `fd` is direction-major.
inline void collide_cell(LbmState& st, std::size_t idx, std::size_t N) {
    double* f = st.f.data();
    double rho = 0.0, mx = 0.0, my = 0.0, mz = 0.0;
    for (int i = 0; i < kQ; ++i) {
        double v = f[i * N + idx];
        rho += v;
        mx += v * kCx[i];
        my += v * kCy[i];
        mz += v * kCz[i];
    }
    const double fx = st.accel_lat.x * rho, fy = st.accel_lat.y * rho,
                 fz = st.accel_lat.z * rho;
    double ux = (mx + 0.5 * fx) / rho;
    double uy = (my + 0.5 * fy) / rho;
    double uz = (mz + 0.5 * fz) / rho;
    st.rho[idx] = rho;
    st.ux[idx] = ux;
    st.uy[idx] = uy;
    st.uz[idx] = uz;
    const double omega = 1.0 / st.tau;
    const double fpref = 1.0 - 0.5 * omega;
    const double usq = ux * ux + uy * uy + uz * uz;
    for (int i = 0; i < kQ; ++i) {
        double eu = kCx[i] * ux + kCy[i] * uy + kCz[i] * uz;
        double eqv = kW[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq);
        double ef = kCx[i] * fx + kCy[i] * fy + kCz[i] * fz;
        double uf = ux * fx + uy * fy + uz * fz;
        double src = kW[i] * fpref * (3.0 * (ef - uf) + 9.0 * eu * ef);
        double& fi = f[i * N + idx];
        fi = fi - omega * (fi - eqv) + src;
    }
}

enum class CellKind : std::uint8_t { Solid, Bulk, Boundary };

} // namespace

Vec3 momentum_exchange_force_N(const FlowField& field) {
    if (!field.state) {
        return {0, 0, 0};
    }
    const LbmState& st = *field.state;
    const VoxelDomain& dom = st.domain;
    const std::size_t N = st.N();
    const Int3 n = dom.n;
    const double omega = 1.0 / st.tau;

    Kahan fx, fy, fz;
    for (int z = 0; z < n.z; ++z) {
        for (int y = 0; y < n.y; ++y) {
            for (int x = 0; x < n.x; ++x) {
                std::size_t idx = dom.idx(x, y, z);
                if (dom.solid[idx]) continue;
                bool near_body = false;
                for (int i = 1; i < kQ && !near_body; ++i) {
                    int sx2 = x + kCx[i], sy2 = y + kCy[i], sz2 = z + kCz[i];
                    if (sx2 < 0 || sx2 >= n.x || sy2 < 0 || sy2 >= n.y || sz2 < 0 ||
                        sz2 >= n.z) {
                        continue;
                    }
                    if (dom.solid[dom.idx(sx2, sy2, sz2)]) near_body = true;
                }
                if (!near_body) continue;
                // Macroscopic state from the current distributions.
                double rho = 0.0, mx = 0.0, my = 0.0, mz = 0.0;
                for (int i = 0; i < kQ; ++i) {
                    double v = st.f[static_cast<std::size_t>(i) * N + idx];
                    rho += v;
                    mx += v * kCx[i];
                    my += v * kCy[i];
                    mz += v * kCz[i];
                }
                double ux = mx / rho, uy = my / rho, uz = mz / rho;
                for (int i = 1; i < kQ; ++i) {
                    int sx2 = x + kCx[i], sy2 = y + kCy[i], sz2 = z + kCz[i];
                    if (sx2 < 0 || sx2 >= n.x || sy2 < 0 || sy2 >= n.y || sz2 < 0 ||
                        sz2 >= n.z) {
                        continue; // domain faces are not body
                    }
                    if (!dom.solid[dom.idx(sx2, sy2, sz2)]) continue;
                    // Link from this fluid cell into the body along e_i.
                    // Momentum to the wall per step: e_i * 2 * fhat_i(x).
                    double fi = st.f[static_cast<std::size_t>(i) * N + idx];
                    double eqv = feq(i, rho, ux, uy, uz);
                    double fhat = fi - omega * (fi - eqv);
                    fx.add(2.0 * fhat * kCx[i]);
                    fy.add(2.0 * fhat * kCy[i]);
                    fz.add(2.0 * fhat * kCz[i]);
                }
            }
        }
    }
    double conv = st.rho_phys * std::pow(st.domain.dx_m, 4) / (st.dt_s * st.dt_s);
    return {fx.sum * conv, fy.sum * conv, fz.sum * conv};
}

FlowField lbm_solve(const VoxelDomain& domain, const FlowConditions& cond,
                    const LbmOptions& opts) {
    const Tables& tb = tables();
    const Int3 n = domain.n;
    const std::size_t N = domain.count();
    if (N == 0) {
        throw Error(Err::RangeViolation, "empty voxel domain");
    }
    if (domain.solid.size() != N) {
        throw Error(Err::RangeViolation, "solid mask size mismatch");
    }

    auto state = std::make_shared<LbmState>();
    LbmState& st = *state;
    st.domain = domain;
    Scaling sc = choose_scaling(cond.inlet_speed_m_s, cond.kinematic_viscosity_m2_s,
                                domain.dx_m, opts);
    st.tau = sc.tau;
    st.u_lat = sc.u_lat;
    st.dt_s = sc.dt_s;
    st.rho_phys = cond.density_kg_m3;
    double accel_conv = sc.dt_s * sc.dt_s / domain.dx_m;
    st.accel_lat = domain.body_accel_m_s2 * accel_conv;

    bool forced = norm(domain.body_accel_m_s2) > 0.0;
    bool has_inlet = false;
    for (int fcs = 0; fcs < 6; ++fcs) {
        if (domain.bc[fcs] == FaceBc::Inlet) has_inlet = true;
    }
    const double u_in = st.u_lat;
    double init_u = (forced || !has_inlet) ? 0.0 : u_in;

    st.f.assign(kQ * N, 0.0);
    st.ux.assign(N, init_u);
    st.uy.assign(N, 0.0);
    st.uz.assign(N, 0.0);
    st.rho.assign(N, 1.0);
    for (std::size_t idx = 0; idx < N; ++idx) {
        double u0 = domain.solid[idx] ? 0.0 : init_u;
        for (int i = 0; i < kQ; ++i) {
            st.f[i * N + idx] = feq(i, 1.0, u0, 0.0, 0.0);
        }
        if (domain.solid[idx]) st.ux[idx] = 0.0;
    }

    // Cell kinds: bulk cells pull all 19 neighbors without checks.
    std::vector<std::uint8_t> kind(N);
    for (int z = 0; z < n.z; ++z) {
        for (int y = 0; y < n.y; ++y) {
            for (int x = 0; x < n.x; ++x) {
                std::size_t idx = domain.idx(x, y, z);
                if (domain.solid[idx]) {
                    kind[idx] = static_cast<std::uint8_t>(CellKind::Solid);
                    continue;
                }
                bool bulk = x > 0 && x + 1 < n.x && y > 0 && y + 1 < n.y && z > 0 &&
                            z + 1 < n.z;
                if (bulk) {
                    for (int i = 1; i < kQ && bulk; ++i) {
                        if (domain.solid[domain.idx(x - kCx[i], y - kCy[i], z - kCz[i])]) {
                            bulk = false;
                        }
                    }
                }
                kind[idx] = static_cast<std::uint8_t>(bulk ? CellKind::Bulk
                                                           : CellKind::Boundary);
            }
        }
    }

    long off[kQ];
    for (int i = 0; i < kQ; ++i) {
        off[i] = kCx[i] + static_cast<long>(n.x) * (kCy[i] + static_cast<long>(n.y) * kCz[i]);
    }

    std::vector<double> fnew(kQ * N);
    // Seed fnew for solid cells once; they are never streamed.
    for (std::size_t idx = 0; idx < N; ++idx) {
        if (domain.solid[idx]) {
            for (int i = 0; i < kQ; ++i) fnew[i * N + idx] = st.f[i * N + idx];
        }
    }

    std::vector<Kahan> slab_fx(n.z), slab_fy(n.z), slab_fz(n.z);

    auto stream_cell = [&](int x, int y, int z, std::size_t idx, Kahan& kfx, Kahan& kfy,
                           Kahan& kfz) {
        const double* f = st.f.data();
        for (int i = 0; i < kQ; ++i) {
            int sx = x - kCx[i], sy = y - kCy[i], sz = z - kCz[i];
            int dir = i;
            bool done = false;
            double value = 0.0;
            int coords[3] = {sx, sy, sz};
            const int lim[3] = {n.x, n.y, n.z};
            // Resolve symmetry/periodic faces first, then inlet/outlet/wall.
            for (int a = 0; a < 3 && !done; ++a) {
                if (coords[a] >= 0 && coords[a] < lim[a]) continue;
                int face = 2 * a + (coords[a] < 0 ? 0 : 1);
                switch (domain.bc[face]) {
                    case FaceBc::Periodic:
                        coords[a] = (coords[a] + lim[a]) % lim[a];
                        break;
                    case FaceBc::Symmetry:
                        coords[a] = coords[a] < 0 ? -coords[a] - 1 : 2 * lim[a] - 1 - coords[a];
                        dir = tb.mirror[a][dir];
                        break;
                    case FaceBc::Wall:
                        value = f[static_cast<std::size_t>(tb.opp[i]) * N + idx];
                        done = true;
                        break;
                    case FaceBc::Inlet:
                        value = feq(i, 1.0, u_in, 0.0, 0.0);
                        done = true;
                        break;
                    case FaceBc::Outlet:
                        value = feq(i, 1.0, st.ux[idx], st.uy[idx], st.uz[idx]);
                        done = true;
                        break;
                }
            }
            if (!done) {
                std::size_t src = domain.idx(coords[0], coords[1], coords[2]);
                if (domain.solid[src]) {
                    // Half-way bounce-back on the body; momentum exchange.
                    int io = tb.opp[i];
                    value = f[static_cast<std::size_t>(io) * N + idx];
                    kfx.add(2.0 * value * kCx[io]);
                    kfy.add(2.0 * value * kCy[io]);
                    kfz.add(2.0 * value * kCz[io]);
                } else {
                    value = f[static_cast<std::size_t>(dir) * N + src];
                }
            }
            fnew[static_cast<std::size_t>(i) * N + idx] = value;
        }
    };

    const double mach_limit_sq = std::pow(0.3 / std::sqrt(3.0), 2);
    const double force_conv = st.rho_phys * std::pow(domain.dx_m, 4) / (st.dt_s * st.dt_s);

    bool has_body = false;
    for (std::uint8_t s : domain.solid) {
        if (s) {
            has_body = true;
            break;
        }
    }
    // Without a body there is no drag signal; convergence watches the
    // velocity change instead.
    std::vector<double> ux_snap, uy_snap, uz_snap;
    if (!has_body) {
        ux_snap = st.ux;
        uy_snap = st.uy;
        uz_snap = st.uz;
    }

    FlowField field;
    field.n = n;
    field.dx_m = domain.dx_m;
    field.origin_m = domain.origin_m;
    field.tau = st.tau;
    field.lattice_u = st.u_lat;
    field.dt_s = st.dt_s;

    double prev_drag = std::numeric_limits<double>::quiet_NaN();
    double prev_mass = std::numeric_limits<double>::quiet_NaN();
    double step_drag_lat = 0.0;
    long step = 0;
    bool converged = false;

    for (step = 1; step <= opts.max_steps; ++step) {
        // Collision (cell-local, trivially parallel).
        parallel_for(static_cast<std::size_t>(n.z), opts.workers, [&](std::size_t z) {
            for (int y = 0; y < n.y; ++y) {
                std::size_t row = (z * n.y + y) * n.x;
                for (int x = 0; x < n.x; ++x) {
                    std::size_t idx = row + x;
                    if (kind[idx] != static_cast<std::uint8_t>(CellKind::Solid)) {
                        collide_cell(st, idx, N);
                    }
                }
            }
        });

        // Streaming; per-slab force accumulators keep the reduction
        // deterministic for any worker count.
        parallel_for(static_cast<std::size_t>(n.z), opts.workers, [&](std::size_t z) {
            slab_fx[z] = Kahan{};
            slab_fy[z] = Kahan{};
            slab_fz[z] = Kahan{};
            const double* f = st.f.data();
            for (int y = 0; y < n.y; ++y) {
                std::size_t row = (z * n.y + y) * n.x;
                for (int x = 0; x < n.x; ++x) {
                    std::size_t idx = row + x;
                    std::uint8_t k = kind[idx];
                    if (k == static_cast<std::uint8_t>(CellKind::Solid)) continue;
                    if (k == static_cast<std::uint8_t>(CellKind::Bulk)) {
                        for (int i = 0; i < kQ; ++i) {
                            fnew[static_cast<std::size_t>(i) * N + idx] =
                                f[static_cast<std::size_t>(i) * N + idx - off[i]];
                        }
                    } else {
                        stream_cell(x, y, static_cast<int>(z), idx, slab_fx[z], slab_fy[z],
                                    slab_fz[z]);
                    }
                }
            }
        });
        std::swap(st.f, fnew);

        Kahan fx, fy, fz;
        for (int z = 0; z < n.z; ++z) {
            fx.add(slab_fx[z].sum);
            fy.add(slab_fy[z].sum);
            fz.add(slab_fz[z].sum);
        }
        step_drag_lat = fx.sum;

        if (step % opts.window == 0) {
            double drag = step_drag_lat * force_conv;
            if (std::isnan(drag)) {
                throw Error(Err::Diverged, "NaN drag at step " + std::to_string(step));
            }
            double max_usq = 0.0;
            Kahan mass;
            for (std::size_t idx = 0; idx < N; ++idx) {
                if (kind[idx] == static_cast<std::uint8_t>(CellKind::Solid)) continue;
                double usq = st.ux[idx] * st.ux[idx] + st.uy[idx] * st.uy[idx] +
                             st.uz[idx] * st.uz[idx];
                max_usq = std::max(max_usq, usq);
                mass.add(st.rho[idx]);
            }
            if (std::isnan(max_usq) || max_usq > mach_limit_sq) {
                throw Error(Err::Diverged,
                            "lattice Mach exceeded 0.3 at step " + std::to_string(step));
            }
            double rel = 0.0;
            bool have_rel = false;
            if (has_body) {
                if (!std::isnan(prev_drag)) {
                    double denom = std::max(std::abs(drag), 1e-300);
                    rel = std::abs(drag - prev_drag) / denom;
                    if (drag == 0.0 && prev_drag == 0.0) rel = 0.0;
                    have_rel = true;
                }
            } else {
                double du = 0.0;
                for (std::size_t idx = 0; idx < N; ++idx) {
                    du = std::max({du, std::abs(st.ux[idx] - ux_snap[idx]),
                                   std::abs(st.uy[idx] - uy_snap[idx]),
                                   std::abs(st.uz[idx] - uz_snap[idx])});
                }
                rel = du / std::max(st.u_lat, 1e-300);
                have_rel = true;
                ux_snap = st.ux;
                uy_snap = st.uy;
                uz_snap = st.uz;
            }
            if (have_rel) {
                field.residual_history.push_back(rel);
                if (!std::isnan(prev_mass)) {
                    double dm_per_step = std::abs(mass.sum - prev_mass) / opts.window;
                    double denom_flux = has_inlet
                                            ? st.u_lat * static_cast<double>(n.y) * n.z
                                            : std::max(mass.sum, 1e-300);
                    field.mass_defect_rel = dm_per_step / denom_flux;
                }
                if (rel < opts.residual_tol) {
                    converged = true;
                }
            }
            prev_drag = drag;
            prev_mass = mass.sum;
            if (converged) break;
        }
    }

    if (!converged) {
        throw Error(Err::NotConverged,
                    "drag residual above tolerance after " + std::to_string(opts.max_steps) +
                        " steps");
    }

    field.steps = std::min(step, opts.max_steps);
    field.converged = converged;
    const double vel_conv = domain.dx_m / st.dt_s;
    const double p_conv = (1.0 / 3.0) * st.rho_phys * vel_conv * vel_conv;
    field.velocity_m_s.resize(N);
    field.pressure_pa.resize(N);
    for (std::size_t idx = 0; idx < N; ++idx) {
        if (kind[idx] == static_cast<std::uint8_t>(CellKind::Solid)) {
            field.velocity_m_s[idx] = {0, 0, 0};
            field.pressure_pa[idx] = 0.0;
        } else {
            field.velocity_m_s[idx] = {st.ux[idx] * vel_conv, st.uy[idx] * vel_conv,
                                       st.uz[idx] * vel_conv};
            field.pressure_pa[idx] = (st.rho[idx] - 1.0) * p_conv;
        }
    }
    field.state = state;
    return field;
}

FlowField make_equilibrium_field(const VoxelDomain& domain, const FlowConditions& cond,
                                 const Vec3& velocity_m_s, const LbmOptions& opts) {
    auto state = std::make_shared<LbmState>();
    LbmState& st = *state;
    st.domain = domain;
    Scaling sc = choose_scaling(cond.inlet_speed_m_s, cond.kinematic_viscosity_m2_s,
                                domain.dx_m, opts);
    st.tau = sc.tau;
    st.u_lat = sc.u_lat;
    st.dt_s = sc.dt_s;
    st.rho_phys = cond.density_kg_m3;

    const std::size_t N = domain.count();
    Vec3 u_lat = velocity_m_s * (sc.dt_s / domain.dx_m);
    st.f.assign(kQ * N, 0.0);
    st.ux.assign(N, 0.0);
    st.uy.assign(N, 0.0);
    st.uz.assign(N, 0.0);
    st.rho.assign(N, 1.0);
    for (std::size_t idx = 0; idx < N; ++idx) {
        Vec3 u = domain.solid[idx] ? Vec3{0, 0, 0} : u_lat;
        for (int i = 0; i < kQ; ++i) {
            st.f[i * N + idx] = feq(i, 1.0, u.x, u.y, u.z);
        }
        st.ux[idx] = u.x;
        st.uy[idx] = u.y;
        st.uz[idx] = u.z;
    }

    FlowField field;
    field.n = domain.n;
    field.dx_m = domain.dx_m;
    field.origin_m = domain.origin_m;
    field.tau = st.tau;
    field.lattice_u = st.u_lat;
    field.dt_s = st.dt_s;
    field.converged = true;
    const double vel_conv = domain.dx_m / st.dt_s;
    field.velocity_m_s.resize(N);
    field.pressure_pa.assign(N, 0.0);
    for (std::size_t idx = 0; idx < N; ++idx) {
        field.velocity_m_s[idx] = {st.ux[idx] * vel_conv, st.uy[idx] * vel_conv,
                                   st.uz[idx] * vel_conv};
    }
    field.state = state;
    return field;
}

DragReport drag_from_field(const FlowField& field, const FlowConditions& cond) {
    DragReport rep;
    Vec3 force = momentum_exchange_force_N(field);
    rep.force_N = force;
    rep.drag_N = force.x;
    rep.iterations = field.steps;
    if (field.state) {
        const VoxelDomain& dom = field.state->domain;
        rep.reference_area_m2 = frontal_area_m2(dom);
        rep.reynolds = cond.reynolds(dom.body_length_m);
    }
    double q = 0.5 * cond.density_kg_m3 * cond.inlet_speed_m_s * cond.inlet_speed_m_s;
    rep.drag_coefficient =
        rep.reference_area_m2 > 0.0 ? rep.drag_N / (q * rep.reference_area_m2) : 0.0;
    return rep;
}

} // namespace anvil
