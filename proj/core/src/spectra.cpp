#include "oscflat/spectra.hpp"

#include <cmath>
#include <string>

namespace oscflat::spectra {

namespace {

double fd_integrand(int k, double eta, double x) {
    // exp(x-eta) can overflow for large x; the integrand is then ~x^k e^{eta-x}.
    const double t = x - eta;
    if (t > 500.0) return std::pow(x, k) * std::exp(-t);
    return std::pow(x, k) / (std::exp(t) + 1.0);
}

struct Quad {
    int k;
    double eta;
    int evals = 0;
    static constexpr int kMaxEvals = 200000;

    double simpson(double a, double b, double fa, double fm, double fb) const {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }

    double adapt(double a, double b, double fa, double fm, double fb, double whole,
                 double tol, int depth) {
        if (evals > kMaxEvals || depth > 60)
            throw NumericError("fermi_integral: quadrature did not converge (k=" +
                               std::to_string(k) + ", eta=" + std::to_string(eta) +
                               ", interval [" + std::to_string(a) + "," +
                               std::to_string(b) + "])");
        const double m = 0.5 * (a + b);
        const double fl = fd_integrand(k, eta, 0.5 * (a + m));
        const double fr = fd_integrand(k, eta, 0.5 * (m + b));
        evals += 2;
        const double left = simpson(a, m, fa, fl, fm);
        const double right = simpson(m, b, fm, fr, fb);
        if (std::fabs(left + right - whole) <= 15.0 * tol)
            return left + right + (left + right - whole) / 15.0;
        return adapt(a, m, fa, fl, fm, left, 0.5 * tol, depth + 1) +
               adapt(m, b, fm, fr, fb, right, 0.5 * tol, depth + 1);
    }

    double run(double a, double b, double tol) {
        const double fa = fd_integrand(k, eta, a);
        const double fb = fd_integrand(k, eta, b);
        const double fm = fd_integrand(k, eta, 0.5 * (a + b));
        evals += 3;
        return adapt(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0);
    }
};

/// Tail bound: for X >= eta, int_X^inf x^k e^{eta-x} dx in closed form.
double fd_tail(int k, double eta, double X) {
    // e^{eta-X} * sum_{j=0..k} k!/j! X^j
    double poly = 0.0;
    double fact = 1.0;  // k!/j! built downward
    for (int j = k; j >= 0; --j) {
        poly += fact * std::pow(X, j);
        fact *= j;  // (k!/j!) * j = k!/(j-1)!
    }
    return std::exp(eta - X) * poly;
}

}  // namespace

double fermi_integral(int k, double eta) {
    if (k < 0) throw ConfigError("fermi_integral: k must be >= 0");
    const double X = std::max(eta, 0.0) + 40.0;  // tail < e^-40 relative
    Quad q{k, eta};
    const double body = q.run(0.0, X, 1e-10);
    return body + fd_tail(k, eta, X);
}

double temperature_from_mean_energy(double Emean_MeV, double eta) {
    if (Emean_MeV <= 0.0) throw ConfigError("temperature_from_mean_energy: Emean must be > 0");
    return Emean_MeV * fermi_integral(2, eta) / fermi_integral(3, eta);
}

double mean_energy_from_temperature(double T_MeV, double eta) {
    if (T_MeV <= 0.0) throw ConfigError("mean_energy_from_temperature: T must be > 0");
    return T_MeV * fermi_integral(3, eta) / fermi_integral(2, eta);
}

SpectrumTable::SpectrumTable(const SpectrumParams& p, double E0, double E1, int ebins,
                             double coupling_per_km)
    : E0_(E0), E1_(E1), ebins_(ebins), padded_(padded_len(ebins)),
      eta_(p.eta), coupling_(coupling_per_km) {
    if (ebins < 1) throw ConfigError("build_spectrum: ebins must be >= 1");
    if (!(E1 > E0) || E0 < 0.0) throw ConfigError("build_spectrum: need E1 > E0 >= 0");
    if (p.T > 0.0) {
        T_ = p.T;
        Emean_ = mean_energy_from_temperature(T_, eta_);
    } else if (p.Emean > 0.0) {
        Emean_ = p.Emean;
        T_ = temperature_from_mean_energy(Emean_, eta_);
    } else {
        throw ConfigError("build_spectrum: one of T or Emean must be positive");
    }

    dE_ = (E1_ - E0_) / ebins_;
    f_.resize(padded_);
    fdE_.resize(padded_);

    // f(E) = E^2 / (F_2(eta) T^3 (exp(E/T - eta) + 1)); integral over
    // [0, inf) is one by construction of F_2.
    const double norm = 1.0 / (fermi_integral(2, eta_) * T_ * T_ * T_);
    double acc = 0.0;
    for (int e = 0; e < padded_; ++e) {
        if (e < ebins_) {
            const double E = bin_center(e);
            const double t = E / T_ - eta_;
            const double den = (t > 500.0) ? std::exp(t) : std::exp(t) + 1.0;
            f_[e] = norm * E * E / den;
            fdE_[e] = f_[e] * dE_;
            acc += fdE_[e];
        } else {
            f_[e] = 0.0;
            fdE_[e] = 0.0;
        }
    }
    deficit_ = 1.0 - acc;
}

double SpectrumTable::grid_mean_energy() const {
    double num = 0.0, den = 0.0;
    for (int e = 0; e < ebins_; ++e) {
        num += bin_center(e) * fdE_[e];
        den += fdE_[e];
    }
    return num / den;
}

}  // namespace oscflat::spectra
