#include "oscfield/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace oscfield {

namespace {

constexpr double kPi = std::numbers::pi;

double require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " must be strictly positive");
    }
    return v;
}

}  // namespace

std::string to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::interval: return "interval";
        case DomainKind::rectangle: return "rectangle";
        case DomainKind::disk: return "disk";
        case DomainKind::sphere: return "sphere";
    }
    return "?";
}

DomainKind domain_kind_from_string(const std::string& name) {
    if (name == "interval") return DomainKind::interval;
    if (name == "rectangle") return DomainKind::rectangle;
    if (name == "disk") return DomainKind::disk;
    if (name == "sphere") return DomainKind::sphere;
    throw ConfigError("unsupported domain kind: '" + name + "'");
}

DomainSpec DomainSpec::interval(double half_length) {
    DomainSpec d;
    d.kind = DomainKind::interval;
    d.half_length = require_positive(half_length, "interval half-length");
    return d;
}

DomainSpec DomainSpec::rectangle(double half_length_x, double half_length_y) {
    DomainSpec d;
    d.kind = DomainKind::rectangle;
    d.half_length_x = require_positive(half_length_x, "rectangle half-length Lx");
    d.half_length_y = require_positive(half_length_y, "rectangle half-length Ly");
    return d;
}

DomainSpec DomainSpec::disk(double radius) {
    DomainSpec d;
    d.kind = DomainKind::disk;
    d.radius = require_positive(radius, "disk radius");
    return d;
}

DomainSpec DomainSpec::sphere(double radius) {
    DomainSpec d;
    d.kind = DomainKind::sphere;
    d.radius = require_positive(radius, "sphere radius");
    return d;
}

int DomainSpec::coord_dim() const {
    switch (kind) {
        case DomainKind::interval: return 1;
        case DomainKind::rectangle: return 2;
        case DomainKind::disk: return 2;
        case DomainKind::sphere: return 3;
    }
    return 0;
}

int DomainSpec::kernel_dim() const {
    return kind == DomainKind::interval ? 1 : 2;
}

double DomainSpec::measure() const {
    switch (kind) {
        case DomainKind::interval: return 2.0 * half_length;
        case DomainKind::rectangle: return 4.0 * half_length_x * half_length_y;
        case DomainKind::disk: return kPi * radius * radius;
        case DomainKind::sphere: return 4.0 * kPi * radius * radius;
    }
    return 0.0;
}

double DomainSpec::length_scale() const {
    switch (kind) {
        case DomainKind::interval: return half_length;
        case DomainKind::rectangle: return std::max(half_length_x, half_length_y);
        case DomainKind::disk: return radius;
        case DomainKind::sphere: return radius;
    }
    return 0.0;
}

bool DomainSpec::contains(const double* x) const {
    switch (kind) {
        case DomainKind::interval: {
            const double tol = 1e-9 * half_length;
            return std::abs(x[0]) <= half_length + tol;
        }
        case DomainKind::rectangle: {
            return std::abs(x[0]) <= half_length_x + 1e-9 * half_length_x &&
                   std::abs(x[1]) <= half_length_y + 1e-9 * half_length_y;
        }
        case DomainKind::disk: {
            const double r = std::hypot(x[0], x[1]);
            return r <= radius * (1.0 + 1e-9);
        }
        case DomainKind::sphere: {
            const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            return std::abs(r - radius) <= 1e-6 * radius;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Bessel zeros
// ---------------------------------------------------------------------------

double bessel_j_zero(int order, int k) {
    if (order < 0 || k < 1) throw std::invalid_argument("bessel_j_zero: order >= 0, k >= 1");
    const double nu = static_cast<double>(order);
    auto f = [nu](double x) { return std::cyl_bessel_j(nu, x); };

    // J_m is positive on (0, j_{m,1}); scan past x = m where the zeros live.
    // Consecutive zeros are separated by more than 2.4, so a 0.5 step cannot
    // skip a sign change.
    const double step = 0.5;
    double lo = std::max(0.25, nu);
    double f_lo = f(lo);
    int found = 0;
    for (int guard = 0; guard < 1000000; ++guard) {
        double hi = lo + step;
        double f_hi = f(hi);
        if ((f_lo < 0.0) != (f_hi < 0.0)) {
            ++found;
            if (found == k) {
                // Bisect to 1e-12 relative width.
                for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double f_mid = f(mid);
                    if ((f_lo < 0.0) != (f_mid < 0.0)) {
                        hi = mid;
                    } else {
                        lo = mid;
                        f_lo = f_mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    throw NumericalError("bessel_j_zero: zero not found (order " + std::to_string(order) +
                         ", k " + std::to_string(k) + ")");
}

// ---------------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n.
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[half - 1] = 0.0;
}

// ---------------------------------------------------------------------------
// BasisSet
// ---------------------------------------------------------------------------

BasisSet::BasisSet(DomainSpec domain, std::vector<double> eigenvalues,
                   std::vector<ModeIndex> modes, std::vector<double> norms)
    : domain_(domain),
      eigenvalues_(std::move(eigenvalues)),
      modes_(std::move(modes)),
      norms_(std::move(norms)) {}

std::string BasisSet::mode_label(int n) const {
    const ModeIndex& m = modes_[n];
    std::ostringstream os;
    switch (domain_.kind) {
        case DomainKind::interval: os << "n=" << m.a; break;
        case DomainKind::rectangle: os << "nx=" << m.a << ",ny=" << m.b; break;
        case DomainKind::disk:
            os << "m=" << m.a << ",k=" << m.b << "," << (m.c == 0 ? "cos" : "sin");
            break;
        case DomainKind::sphere: os << "l=" << m.a << ",m=" << m.b; break;
    }
    return os.str();
}

double BasisSet::eval_one(int n, const double* x) const {
    const ModeIndex& idx = modes_[n];
    switch (domain_.kind) {
        case DomainKind::interval: {
            const double L = domain_.half_length;
            if (x[0] <= -L || x[0] >= L) return 0.0;
            const double u = (x[0] + L) / (2.0 * L);
            return std::sin(idx.a * kPi * u) / std::sqrt(L);
        }
        case DomainKind::rectangle: {
            const double Lx = domain_.half_length_x, Ly = domain_.half_length_y;
            if (x[0] <= -Lx || x[0] >= Lx || x[1] <= -Ly || x[1] >= Ly) return 0.0;
            const double ux = (x[0] + Lx) / (2.0 * Lx);
            const double uy = (x[1] + Ly) / (2.0 * Ly);
            return std::sin(idx.a * kPi * ux) * std::sin(idx.b * kPi * uy) /
                   std::sqrt(Lx * Ly);
        }
        case DomainKind::disk: {
            const double R = domain_.radius;
            const double r = std::hypot(x[0], x[1]);
            if (r >= R) return 0.0;
            const double alpha = std::sqrt(eigenvalues_[n]) * R;  // = j_{m,k}
            const double radial = std::cyl_bessel_j(static_cast<double>(idx.a), alpha * r / R);
            double angular = 1.0;
            if (idx.a > 0) {
                const double theta = std::atan2(x[1], x[0]);
                angular = idx.c == 0 ? std::cos(idx.a * theta) : std::sin(idx.a * theta);
            }
            return norms_[n] * radial * angular;
        }
        case DomainKind::sphere: {
            const double rho = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            const double theta = std::acos(std::clamp(x[2] / rho, -1.0, 1.0));
            const int l = idx.a, m = idx.b;
            const unsigned am = static_cast<unsigned>(std::abs(m));
            double v = std::sph_legendre(static_cast<unsigned>(l), am, theta);
            if (m != 0) {
                const double phi = std::atan2(x[1], x[0]);
                v *= std::numbers::sqrt2 *
                     (m > 0 ? std::cos(am * phi) : std::sin(am * phi));
            }
            return v / domain_.radius;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// build_basis
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    double lambda;
    ModeIndex idx;
    double norm;
};

void sort_and_truncate(std::vector<Candidate>& cand, int n_modes) {
    std::sort(cand.begin(), cand.end(), [](const Candidate& x, const Candidate& y) {
        if (x.lambda != y.lambda) return x.lambda < y.lambda;
        return x.idx < y.idx;
    });
    cand.resize(n_modes);
}

std::vector<Candidate> interval_candidates(double L, int n_modes) {
    std::vector<Candidate> cand;
    cand.reserve(n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        const double w = n * kPi / (2.0 * L);
        cand.push_back({w * w, {n, 0, 0}, 1.0});
    }
    return cand;
}

std::vector<Candidate> rectangle_candidates(double Lx, double Ly, int n_modes) {
    // Collect every (nx, ny) with eigenvalue below a growing cutoff until the
    // pool certainly contains the n_modes smallest.
    const double lx1 = kPi / (2.0 * Lx), ly1 = kPi / (2.0 * Ly);
    double cut = n_modes * (lx1 * lx1 + ly1 * ly1);
    std::vector<Candidate> cand;
    for (;;) {
        cand.clear();
        const int nx_max = static_cast<int>(std::sqrt(cut) / lx1) + 1;
        for (int nx = 1; nx <= nx_max; ++nx) {
            const double lam_x = (nx * lx1) * (nx * lx1);
            if (lam_x > cut) break;
            const int ny_max = static_cast<int>(std::sqrt(cut - lam_x) / ly1) + 1;
            for (int ny = 1; ny <= ny_max; ++ny) {
                const double lam = lam_x + (ny * ly1) * (ny * ly1);
                if (lam <= cut) cand.push_back({lam, {nx, ny, 0}, 1.0});
            }
        }
        if (static_cast<int>(cand.size()) >= n_modes) return cand;
        cut *= 2.0;
    }
}

std::vector<Candidate> disk_candidates(double R, int n_modes) {
    // Zeros j_{m,k} <= cut give eigenvalues (j/R)^2; m >= 1 contributes both
    // angular parities. Grow the cutoff until enough modes are collected.
    double cut = 2.0 * std::sqrt(static_cast<double>(n_modes)) + 10.0;
    std::vector<Candidate> cand;
    for (;;) {
        cand.clear();
        for (int m = 0;; ++m) {
            const double j1 = bessel_j_zero(m, 1);
            if (j1 > cut) break;
            for (int k = 1;; ++k) {
                const double j = k == 1 ? j1 : bessel_j_zero(m, k);
                if (j > cut) break;
                const double lam = (j / R) * (j / R);
                const double jp = std::cyl_bessel_j(static_cast<double>(m + 1), j);
                const double norm =
                    (m == 0 ? 1.0 : std::numbers::sqrt2) / (std::sqrt(kPi) * R * std::abs(jp));
                cand.push_back({lam, {m, k, 0}, norm});
                if (m > 0) cand.push_back({lam, {m, k, 1}, norm});
            }
        }
        if (static_cast<int>(cand.size()) >= n_modes) return cand;
        cut *= 1.5;
    }
}

std::vector<Candidate> sphere_candidates(double R, int n_modes, bool include_constant) {
    std::vector<Candidate> cand;
    if (include_constant) cand.push_back({0.0, {0, 0, 0}, 1.0});
    for (int l = 1; static_cast<int>(cand.size()) < n_modes; ++l) {
        const double lam = l * (l + 1.0) / (R * R);
        for (int m = -l; m <= l; ++m) cand.push_back({lam, {l, m, 0}, 1.0});
    }
    return cand;
}

}  // namespace

BasisSet build_basis(const DomainSpec& domain, int n_modes, bool include_sphere_constant_mode) {
    if (n_modes < 1) throw std::invalid_argument("build_basis: N must be >= 1");

    std::vector<Candidate> cand;
    switch (domain.kind) {
        case DomainKind::interval:
            cand = interval_candidates(domain.half_length, n_modes);
            break;
        case DomainKind::rectangle:
            cand = rectangle_candidates(domain.half_length_x, domain.half_length_y, n_modes);
            break;
        case DomainKind::disk:
            cand = disk_candidates(domain.radius, n_modes);
            break;
        case DomainKind::sphere:
            cand = sphere_candidates(domain.radius, n_modes, include_sphere_constant_mode);
            break;
    }
    sort_and_truncate(cand, n_modes);

    std::vector<double> eig(n_modes);
    std::vector<ModeIndex> modes(n_modes);
    std::vector<double> norms(n_modes);
    for (int i = 0; i < n_modes; ++i) {
        eig[i] = cand[i].lambda;
        modes[i] = cand[i].idx;
        norms[i] = cand[i].norm;
    }
    return BasisSet(domain, std::move(eig), std::move(modes), std::move(norms));
}

Eigen::MatrixXd eval_basis(const BasisSet& basis, const Eigen::MatrixXd& points) {
    const DomainSpec& dom = basis.domain();
    if (points.cols() != dom.coord_dim()) {
        throw DataError("eval_basis: points have " + std::to_string(points.cols()) +
                        " coordinates, domain expects " + std::to_string(dom.coord_dim()));
    }
    const int n_pts = static_cast<int>(points.rows());
    Eigen::MatrixXd phi(n_pts, basis.size());
    std::vector<double> x(dom.coord_dim());
    for (int i = 0; i < n_pts; ++i) {
        for (int c = 0; c < dom.coord_dim(); ++c) x[c] = points(i, c);
        if (!dom.contains(x.data())) {
            throw DataError("eval_basis: point " + std::to_string(i) + " lies outside the domain");
        }
        for (int n = 0; n < basis.size(); ++n) phi(i, n) = basis.eval_one(n, x.data());
    }
    return phi;
}

QuadratureGrid quadrature_grid(const DomainSpec& domain, int resolution) {
    if (resolution < 2) throw std::invalid_argument("quadrature_grid: resolution >= 2");
    QuadratureGrid g;
    switch (domain.kind) {
        case DomainKind::interval: {
            const double L = domain.half_length;
            const double h = 2.0 * L / resolution;
            g.points.resize(resolution, 1);
            g.weights.resize(resolution);
            for (int i = 0; i < resolution; ++i) {
                g.points(i, 0) = -L + (i + 0.5) * h;
                g.weights(i) = h;
            }
            break;
        }
        case DomainKind::rectangle: {
            const double Lx = domain.half_length_x, Ly = domain.half_length_y;
            const double hx = 2.0 * Lx / resolution, hy = 2.0 * Ly / resolution;
            g.points.resize(resolution * resolution, 2);
            g.weights.resize(resolution * resolution);
            int row = 0;
            for (int i = 0; i < resolution; ++i) {
                for (int j = 0; j < resolution; ++j, ++row) {
                    g.points(row, 0) = -Lx + (i + 0.5) * hx;
                    g.points(row, 1) = -Ly + (j + 0.5) * hy;
                    g.weights(row) = hx * hy;
                }
            }
            break;
        }
        case DomainKind::disk: {
            const double R = domain.radius;
            std::vector<double> xs, ws;
            gauss_legendre(resolution, xs, ws);
            const double dth = 2.0 * kPi / resolution;
            g.points.resize(resolution * resolution, 2);
            g.weights.resize(resolution * resolution);
            int row = 0;
            for (int i = 0; i < resolution; ++i) {
                const double r = R * 0.5 * (xs[i] + 1.0);
                const double wr = R * 0.5 * ws[i] * r;
                for (int j = 0; j < resolution; ++j, ++row) {
                    const double th = -kPi + (j + 0.5) * dth;
                    g.points(row, 0) = r * std::cos(th);
                    g.points(row, 1) = r * std::sin(th);
                    g.weights(row) = wr * dth;
                }
            }
            break;
        }
        case DomainKind::sphere: {
            const double R = domain.radius;
            std::vector<double> us, ws;
            gauss_legendre(resolution, us, ws);
            const double dphi = 2.0 * kPi / resolution;
            g.points.resize(resolution * resolution, 3);
            g.weights.resize(resolution * resolution);
            int row = 0;
            for (int i = 0; i < resolution; ++i) {
                const double u = us[i];
                const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
                const double wu = R * R * ws[i];
                for (int j = 0; j < resolution; ++j, ++row) {
                    const double phi = -kPi + (j + 0.5) * dphi;
                    g.points(row, 0) = R * s * std::cos(phi);
                    g.points(row, 1) = R * s * std::sin(phi);
                    g.points(row, 2) = R * u;
                    g.weights(row) = wu * dphi;
                }
            }
            break;
        }
    }
    return g;
}

}  // namespace oscfield
