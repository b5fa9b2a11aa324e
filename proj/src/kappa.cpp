#include "ludor/kappa.hpp"

#include <algorithm>
#include <cmath>

#include "ludor/error.hpp"

namespace ludor {

namespace {

constexpr double kStdFloor = 1e-6;

void check_shapes(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError("discrepancy measure: action batches have different shapes");
    }
}

Vec batch_std(const Mat& m) {
    const Vec mean = m.rowwise().mean();
    Vec var = (m.colwise() - mean).array().square().rowwise().mean();
    return var.cwiseSqrt().cwiseMax(kStdFloor);
}

}  // namespace

DiscrepancyWeights uniform_weights(std::size_t batch) {
    DiscrepancyWeights w;
    w.kappa = Vec::Ones(static_cast<Eigen::Index>(batch));
    w.measure = Measure::uniform;
    return w;
}

DiscrepancyWeights kappa_cosine(const Mat& a, const Mat& t) {
    check_shapes(a, t);
    DiscrepancyWeights w;
    w.measure = Measure::cos;
    w.kappa.resize(a.cols());
    for (Eigen::Index b = 0; b < a.cols(); ++b) {
        // one loop, one summation order for all three sums, so t = s * a with s a power
        // of two scales them exactly
        double aa = 0.0, tt = 0.0, at = 0.0;
        for (Eigen::Index k = 0; k < a.rows(); ++k) {
            aa += a(k, b) * a(k, b);
            tt += t(k, b) * t(k, b);
            at += a(k, b) * t(k, b);
        }
        if (aa == 0.0 || tt == 0.0) {
            w.kappa(b) = 1.0;
            ++w.neutral_count;
            continue;
        }
        // sqrt(aa * tt) rather than |a| |t|: exact for t = +-a, so those give 2 and 0 exactly
        const double c = at / std::sqrt(aa * tt);
        w.kappa(b) = 1.0 + std::clamp(c, -1.0, 1.0);
    }
    return w;
}

double gaussian_kl(const Vec& m1, const Vec& s1, const Vec& m2, const Vec& s2) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < m1.size(); ++i) {
        const double diff = m1(i) - m2(i);
        d += std::log(s2(i) / s1(i)) + (s1(i) * s1(i) + diff * diff) / (2.0 * s2(i) * s2(i)) - 0.5;
    }
    return d;
}

DiscrepancyWeights kappa_variant(Measure measure, const Mat& a, const Mat& t, double fixed_std) {
    check_shapes(a, t);
    DiscrepancyWeights w;
    w.measure = measure;
    w.kappa.resize(a.cols());
    const auto dims = a.rows();
    Vec sa;
    Vec st;
    switch (measure) {
        case Measure::kl1:
        case Measure::js:
            if (a.cols() < 2) {
                throw ConfigError("batch-fitted divergence measures need a batch of at least 2");
            }
            sa = batch_std(a);
            st = batch_std(t);
            break;
        case Measure::kl2:
            if (!(fixed_std > 0.0)) {
                throw ConfigError("kl2 measure needs a positive std");
            }
            sa = Vec::Constant(dims, fixed_std);
            st = sa;
            break;
        default:
            throw ConfigError("kappa_variant handles kl1, kl2 and js only");
    }
    for (Eigen::Index b = 0; b < a.cols(); ++b) {
        const Vec ma = a.col(b);
        const Vec mt = t.col(b);
        double d = 0.0;
        if (measure == Measure::js) {
            const Vec mm = 0.5 * (ma + mt);
            const Vec sm = (0.5 * (sa.array().square() + st.array().square()) + 0.25 * (ma - mt).array().square())
                               .sqrt()
                               .matrix();
            d = 0.5 * gaussian_kl(ma, sa, mm, sm) + 0.5 * gaussian_kl(mt, st, mm, sm);
        } else {
            d = gaussian_kl(ma, sa, mt, st);
        }
        w.kappa(b) = 2.0 * std::exp(-std::max(d, 0.0));
    }
    return w;
}

DiscrepancyWeights compute_weights(Measure measure, const Mat& a, const Mat& t, double fixed_std) {
    switch (measure) {
        case Measure::cos:
            return kappa_cosine(a, t);
        case Measure::uniform:
            check_shapes(a, t);
            return uniform_weights(static_cast<std::size_t>(a.cols()));
        default:
            return kappa_variant(measure, a, t, fixed_std);
    }
}

}  // namespace ludor
