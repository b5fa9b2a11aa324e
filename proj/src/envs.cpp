#include "ludor/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ludor/error.hpp"

namespace ludor {

namespace {

// pointmass-2d: state (px, py, vx, vy), action = acceleration command.
constexpr double kPmDt = 0.1;
constexpr double kPmDamping = 0.5;
constexpr double kPmDriftStd = 0.005;
constexpr double kPmGoalRadius = 0.1;
constexpr double kPmStopSpeed = 0.1;
constexpr double kPmResetRadiusLo = 1.0;
constexpr double kPmResetRadiusHi = 2.0;
constexpr double kPmResetHalfAngle = std::numbers::pi / 3.0;
constexpr double kPmKp = 0.7;
constexpr double kPmKd = 1.2;
// Crosswind band along the line x = 0: F(p) = (0, gain * exp(-x^2 / (2 width^2))).
// The expert cancels it; a controller that never saw the band does not.
constexpr double kPmFieldGain = 0.9;
constexpr double kPmFieldWidth = 0.15;

// pendulum-swingup: state (cos th, sin th, thdot), th = 0 is upright.
constexpr double kPdDt = 0.05;
constexpr double kPdGravityGain = 15.0;  // 3g / 2l with g = 10, l = 1
constexpr double kPdTorqueGain = 3.0;    // 3 / (m l^2)
constexpr double kPdMaxSpeed = 8.0;
constexpr double kPdCatchCos = 0.85;
constexpr double kPdKp = 10.0;
constexpr double kPdKd = 2.0;
constexpr double kPdEnergyGain = 1.0;

Eigen::Vector2d pm_field(const Eigen::Vector2d& p) {
    const double w = kPmFieldWidth;
    return {0.0, kPmFieldGain * std::exp(-p(0) * p(0) / (2.0 * w * w))};
}

double wrap_angle(double th) {
    double a = std::fmod(th + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

const std::vector<EnvSpec>& registry() {
    static const std::vector<EnvSpec> specs = [] {
        std::vector<EnvSpec> v;
        EnvSpec pm;
        pm.name = "pointmass-2d";
        pm.kind = EnvKind::pointmass2d;
        pm.state_dim = 4;
        pm.action_dim = 2;
        pm.action_bound = 1.0;
        pm.max_steps = 150;
        pm.reward_description = "-||position|| per step (goal at the origin)";
        pm.termination_description = "||position|| < 0.1 and ||velocity|| < 0.1";
        v.push_back(pm);

        EnvSpec pd;
        pd.name = "pendulum-swingup";
        pd.kind = EnvKind::pendulum_swingup;
        pd.state_dim = 3;
        pd.action_dim = 1;
        pd.action_bound = 2.0;
        pd.max_steps = 200;
        pd.reward_description = "-(angle^2 + 0.1 thdot^2 + 0.001 torque^2), angle measured from upright";
        pd.termination_description = "none (step cap only)";
        v.push_back(pd);
        return v;
    }();
    return specs;
}


}  // namespace

const EnvSpec& env_spec(const std::string& name) {
    for (const auto& s : registry()) {
        if (s.name == name) {
            return s;
        }
    }
    throw ConfigError("unknown environment '" + name + "'");
}

std::vector<std::string> env_names() {
    std::vector<std::string> names;
    for (const auto& s : registry()) {
        names.push_back(s.name);
    }
    return names;
}

Vec env_reset(const EnvSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case EnvKind::pointmass2d: {
            const double angle = rng.uniform(-kPmResetHalfAngle, kPmResetHalfAngle);
            const double radius = rng.uniform(kPmResetRadiusLo, kPmResetRadiusHi);
            Vec s(4);
            s << radius * std::cos(angle), radius * std::sin(angle), 0.0, 0.0;
            return s;
        }
        case EnvKind::pendulum_swingup: {
            const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
            const double thdot = rng.uniform(-1.0, 1.0);
            Vec s(3);
            s << std::cos(th), std::sin(th), thdot;
            return s;
        }
    }
    throw InternalError("unhandled environment kind");
}

Vec clip_action(const EnvSpec& spec, const Vec& action) {
    if (static_cast<std::size_t>(action.size()) != spec.action_dim) {
        throw ConfigError(spec.name + ": action has dimension " + std::to_string(action.size()) + ", expected " +
                          std::to_string(spec.action_dim));
    }
    return action.cwiseMax(-spec.action_bound).cwiseMin(spec.action_bound);
}

StepResult env_step(const EnvSpec& spec, const Vec& state, const Vec& action, int step_index, Rng& rng) {
    if (static_cast<std::size_t>(state.size()) != spec.state_dim) {
        throw EnvError(spec.name + ": state has wrong dimension");
    }
    if (!state.allFinite()) {
        throw EnvError(spec.name + ": non-finite state");
    }
    Vec a = clip_action(spec, action);
    if (!a.allFinite()) {
        throw EnvError(spec.name + ": non-finite action");
    }
    StepResult r;
    switch (spec.kind) {
        case EnvKind::pointmass2d: {
            const Eigen::Vector2d p = state.head<2>();
            Eigen::Vector2d v = state.tail<2>();
            v += kPmDt * (a + pm_field(p) - kPmDamping * v);
            v(0) += kPmDriftStd * rng.normal();
            v(1) += kPmDriftStd * rng.normal();
            const Eigen::Vector2d p2 = p + kPmDt * v;
            r.next_state.resize(4);
            r.next_state << p2, v;
            r.reward = -p.norm();
            r.terminal = p2.norm() < kPmGoalRadius && v.norm() < kPmStopSpeed;
            break;
        }
        case EnvKind::pendulum_swingup: {
            const double th = std::atan2(state(1), state(0));
            const double thdot = state(2);
            const double u = a(0);
            double thdot2 = thdot + (kPdGravityGain * std::sin(th) + kPdTorqueGain * u) * kPdDt;
            thdot2 = std::clamp(thdot2, -kPdMaxSpeed, kPdMaxSpeed);
            const double th2 = th + thdot2 * kPdDt;
            const double ang = wrap_angle(th);
            r.reward = -(ang * ang + 0.1 * thdot * thdot + 0.001 * u * u);
            r.next_state.resize(3);
            r.next_state << std::cos(th2), std::sin(th2), thdot2;
            r.terminal = false;
            break;
        }
    }
    r.truncated = !r.terminal && step_index + 1 >= spec.max_steps;
    if (!r.next_state.allFinite()) {
        throw EnvError(spec.name + ": dynamics produced a non-finite state");
    }
    return r;
}

std::string to_string(Tier t) {
    switch (t) {
        case Tier::random:
            return "random";
        case Tier::medium:
            return "medium";
        case Tier::expert:
            return "expert";
    }
    return "random";
}

Tier tier_from_string(const std::string& name) {
    if (name == "random") return Tier::random;
    if (name == "medium") return Tier::medium;
    if (name == "expert") return Tier::expert;
    throw ConfigError("unknown tier '" + name + "'");
}

double medium_noise_std(const EnvSpec& spec) { return 0.75 * spec.action_bound; }

Vec expert_action(const EnvSpec& spec, const Vec& state) {
    Vec a(static_cast<Eigen::Index>(spec.action_dim));
    switch (spec.kind) {
        case EnvKind::pointmass2d:
            // PD controller toward the origin plus cancellation of the field
            a = -kPmKp * state.head<2>() - kPmKd * state.tail<2>() - pm_field(state.head<2>());
            break;
        case EnvKind::pendulum_swingup: {
            const double c = state(0);
            const double th = std::atan2(state(1), state(0));
            const double thdot = state(2);
            if (c > kPdCatchCos) {
                a(0) = -(kPdKp * th + kPdKd * thdot);
            } else {
                // energy pumping toward the upright energy level
                const double energy = 0.5 * thdot * thdot + kPdGravityGain * c;
                const double dir = std::abs(thdot) > 1e-3 ? (thdot > 0.0 ? 1.0 : -1.0) : 1.0;
                a(0) = kPdEnergyGain * (kPdGravityGain - energy) * dir;
            }
            break;
        }
    }
    return clip_action(spec, a);
}

Vec scripted_policy(Tier tier, const EnvSpec& spec, const Vec& state, Rng& rng) {
    switch (tier) {
        case Tier::random: {
            Vec a(static_cast<Eigen::Index>(spec.action_dim));
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                a(i) = rng.uniform(-spec.action_bound, spec.action_bound);
            }
            return a;
        }
        case Tier::medium: {
            Vec a = expert_action(spec, state);
            const double s = medium_noise_std(spec);
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                a(i) += s * rng.normal();
            }
            return clip_action(spec, a);
        }
        case Tier::expert:
            return expert_action(spec, state);
    }
    throw InternalError("unhandled tier");
}

Episode rollout(const EnvSpec& spec, const Policy& policy, Rng& rng) {
    Episode ep;
    Vec s = env_reset(spec, rng);
    for (int t = 0; t < spec.max_steps; ++t) {
        const auto r = env_step(spec, s, policy(s), t, rng);
        ep.total_return += r.reward;
        ep.length = t + 1;
        if (r.done()) {
            break;
        }
        s = r.next_state;
    }
    return ep;
}

double normalized_score(double raw_return, const ScoreReference& ref) {
    if (!(ref.expert_return > ref.random_return)) {
        throw ConfigError("degenerate score reference for '" + ref.env + "': expert return must exceed random return");
    }
    return 100.0 * (raw_return - ref.random_return) / (ref.expert_return - ref.random_return);
}

ScoreReference compute_score_reference(const EnvSpec& spec, int episodes, std::uint64_t seed) {
    ScoreReference ref;
    ref.env = spec.name;
    for (Tier tier : {Tier::random, Tier::expert}) {
        Rng env_rng(seed);
        Rng pol_rng = env_rng.fork(1);
        double total = 0.0;
        for (int e = 0; e < episodes; ++e) {
            total += rollout(spec, [&](const Vec& s) { return scripted_policy(tier, spec, s, pol_rng); }, env_rng)
                         .total_return;
        }
        (tier == Tier::random ? ref.random_return : ref.expert_return) = total / episodes;
    }
    return ref;
}

}  // namespace ludor
