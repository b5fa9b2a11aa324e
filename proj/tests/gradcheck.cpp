#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ludor/losses.hpp"

namespace ludor::testing {

Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.size());
    Vec xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = xp(i);
        xp(i) = orig + h;
        const double fp = f(xp);
        xp(i) = orig - h;
        const double fm = f(xp);
        xp(i) = orig + 0.5 * h;
        const double fp2 = f(xp);
        xp(i) = orig - 0.5 * h;
        const double fm2 = f(xp);
        xp(i) = orig;
        g(i) = (fp - fm) / (2.0 * h);
        // on smooth stretches the two stencils agree to O(h^2); a ReLU kink inside
        // the stencil breaks that, and the difference quotient is meaningless there
        const double g2 = (fp2 - fm2) / h;
        if (std::abs(g(i) - g2) > 1e-4 * std::max(1.0, std::abs(g(i)))) throw NonSmooth{};
    }
    return g;
}

double relative_error(const Vec& a, const Vec& n, double floor) {
    const double denom = std::max({a.norm(), n.norm(), floor});
    return (a - n).norm() / denom;
}

namespace {

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
    return m;
}

Vec random_weights(Eigen::Index n, Rng& rng) {
    Vec k(n);
    for (Eigen::Index i = 0; i < n; ++i) k(i) = 2.0 * rng.uniform();
    k(0) = 0.0;  // a fully down-weighted sample
    return k / k.sum();
}

MlpParams net(std::vector<std::size_t> sizes, Activation out, double scale, Rng& rng) {
    MlpArch a;
    a.sizes = std::move(sizes);
    a.hidden = Activation::relu;
    a.output = out;
    a.output_scale = scale;
    return make_mlp(a, rng);
}

MlpParams with_flat(MlpParams p, const Vec& flat) {
    p.assign_flat(flat);
    return p;
}

}  // namespace

std::vector<GradCase> run_gradient_suite(int instances, double tol, std::uint64_t seed) {
    std::vector<GradCase> cases;
    auto record = [&](const std::string& name, auto&& one) {
        GradCase c;
        c.loss = name;
        Rng rng = Rng(seed).fork(std::hash<std::string>{}(name) & 0xffffffffULL);
        while (c.instances < instances) {
            double err = 0.0;
            try {
                err = one(rng);
            } catch (const NonSmooth&) {
                if (++c.redrawn > 10 * instances) throw;
                continue;
            }
            ++c.instances;
            c.worst = std::max(c.worst, err);
            if (err <= tol) ++c.passed;
        }
        cases.push_back(c);
    };

    constexpr std::size_t sd = 3, ad = 2, hid = 8;
    constexpr Eigen::Index bs = 6;

    record("mlp_backward (tanh net, parameters)", [&](Rng& rng) {
        MlpArch a;
        a.sizes = {sd, hid, ad};
        a.hidden = Activation::tanh;
        a.output = Activation::tanh;
        a.output_scale = 1.5;
        const MlpParams p = make_mlp(a, rng);
        const Mat x = random_mat(sd, bs, rng);
        const Mat c = random_mat(ad, bs, rng);
        auto fw = mlp_forward(p, x);
        const Vec g = mlp_backward(p, fw.cache, c).params;
        auto f = [&](const Vec& flat) { return mlp_predict(with_flat(p, flat), x).cwiseProduct(c).sum(); };
        return relative_error(g, numeric_gradient(f, p.flatten()));
    });

    record("mlp_backward (relu net, input)", [&](Rng& rng) {
        const MlpParams p = net({sd, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat x = random_mat(sd, 1, rng);
        auto fw = mlp_forward(p, x);
        const Mat gin = mlp_backward(p, fw.cache, Mat::Ones(1, 1)).input;
        auto f = [&](const Vec& xv) { return mlp_predict(p, Mat(xv))(0, 0); };
        return relative_error(gin.col(0), numeric_gradient(f, x.col(0)));
    });

    record("weighted critic loss (per-sample terms)", [&](Rng& rng) {
        DiscrepancyWeights w;
        w.kappa = random_weights(bs, rng) * 7.0;
        const Vec terms = random_mat(bs, 1, rng).col(0).cwiseAbs2();
        const auto wl = weighted_critic_loss(terms, w);
        auto f = [&](const Vec& t) { return weighted_critic_loss(t, w).loss; };
        return relative_error(wl.sample_scale, numeric_gradient(f, terms));
    });

    record("weighted actor loss (per-sample terms)", [&](Rng& rng) {
        DiscrepancyWeights w;
        w.kappa = random_weights(bs, rng) * 3.0;
        const Vec terms = random_mat(bs, 1, rng).col(0);
        const auto wl = weighted_actor_loss(terms, w);
        auto f = [&](const Vec& t) { return weighted_actor_loss(t, w).loss; };
        return relative_error(wl.sample_scale, numeric_gradient(f, terms));
    });

    record("critic TD regression (kappa-weighted)", [&](Rng& rng) {
        const MlpParams q = net({sd + ad, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng);
        const Vec y = random_mat(bs, 1, rng).col(0);
        const Vec w = random_weights(bs, rng);
        const auto lg = critic_regression_loss(q, s, a, y, w);
        auto f = [&](const Vec& flat) { return critic_regression_loss(with_flat(q, flat), s, a, y, w).loss; };
        return relative_error(lg.grad, numeric_gradient(f, q.flatten()));
    });

    record("TD3BC actor (kappa-weighted, lambda fixed)", [&](Rng& rng) {
        const MlpParams actor = net({sd, hid, hid, ad}, Activation::tanh, 2.0, rng);
        const MlpParams q1 = net({sd + ad, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng);
        const Vec w = random_weights(bs, rng);
        const double lambda = 0.5 + rng.uniform();
        const auto lg = td3bc_actor_loss(actor, q1, s, a, w, lambda);
        auto f = [&](const Vec& flat) { return td3bc_actor_loss(with_flat(actor, flat), q1, s, a, w, lambda).loss; };
        return relative_error(lg.grad, numeric_gradient(f, actor.flatten()));
    });

    record("IQL expectile value loss", [&](Rng& rng) {
        const MlpParams v = net({sd, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng);
        const Vec qt = random_mat(bs, 1, rng).col(0);
        const double tau = rng.uniform() < 0.5 ? 0.7 : 0.05 + 0.9 * rng.uniform();
        const auto lg = expectile_value_loss(v, s, qt, tau);
        auto f = [&](const Vec& flat) { return expectile_value_loss(with_flat(v, flat), s, qt, tau).loss; };
        return relative_error(lg.grad, numeric_gradient(f, v.flatten()));
    });

    record("IQL advantage-weighted actor (kappa-weighted)", [&](Rng& rng) {
        const MlpParams actor = net({sd, hid, hid, ad}, Activation::tanh, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng, 0.5);
        const Vec awr = awr_weights(random_mat(bs, 1, rng).col(0), 3.0, 100.0);
        const Vec w = random_weights(bs, rng);
        const auto lg = awr_actor_loss(actor, s, a, awr, w);
        auto f = [&](const Vec& flat) { return awr_actor_loss(with_flat(actor, flat), s, a, awr, w).loss; };
        return relative_error(lg.grad, numeric_gradient(f, actor.flatten()));
    });

    record("BC (teacher / baseline)", [&](Rng& rng) {
        const MlpParams p = net({sd, hid, hid, ad}, Activation::tanh, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng, 0.5);
        const auto lg = bc_loss(p, s, a);
        auto f = [&](const Vec& flat) { return bc_loss(with_flat(p, flat), s, a).loss; };
        return relative_error(lg.grad, numeric_gradient(f, p.flatten()));
    });

    record("reward-model regression", [&](Rng& rng) {
        const MlpParams p = net({sd + ad, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat x = random_mat(sd + ad, bs, rng);
        const Vec y = random_mat(bs, 1, rng).col(0);
        const auto lg = regression_loss(p, x, y);
        auto f = [&](const Vec& flat) { return regression_loss(with_flat(p, flat), x, y).loss; };
        return relative_error(lg.grad, numeric_gradient(f, p.flatten()));
    });

    record("combined actor loss (TD3BC + unlabeled BC)", [&](Rng& rng) {
        const MlpParams actor = net({sd, hid, hid, ad}, Activation::tanh, 1.0, rng);
        const MlpParams q1 = net({sd + ad, hid, hid, 1}, Activation::identity, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng, 0.5);
        const Mat su = random_mat(sd, bs, rng), au = random_mat(ad, bs, rng, 0.5);
        const Vec w = Vec::Constant(bs, 1.0 / bs);
        const double lambda = 1.0;
        const Vec g = td3bc_actor_loss(actor, q1, s, a, w, lambda).grad + bc_loss(actor, su, au).grad;
        auto f = [&](const Vec& flat) {
            const MlpParams p = with_flat(actor, flat);
            return td3bc_actor_loss(p, q1, s, a, w, lambda).loss + bc_loss(p, su, au).loss;
        };
        return relative_error(g, numeric_gradient(f, actor.flatten()));
    });

    record("combined actor loss (AWR + unlabeled BC)", [&](Rng& rng) {
        const MlpParams actor = net({sd, hid, hid, ad}, Activation::tanh, 1.0, rng);
        const Mat s = random_mat(sd, bs, rng), a = random_mat(ad, bs, rng, 0.5);
        const Mat su = random_mat(sd, bs, rng), au = random_mat(ad, bs, rng, 0.5);
        const Vec awr = awr_weights(random_mat(bs, 1, rng).col(0), 3.0, 100.0);
        const Vec w = Vec::Constant(bs, 1.0 / bs);
        const Vec g = awr_actor_loss(actor, s, a, awr, w).grad + bc_loss(actor, su, au).grad;
        auto f = [&](const Vec& flat) {
            const MlpParams p = with_flat(actor, flat);
            return awr_actor_loss(p, s, a, awr, w).loss + bc_loss(p, su, au).loss;
        };
        return relative_error(g, numeric_gradient(f, actor.flatten()));
    });

    return cases;
}

}  // namespace ludor::testing
