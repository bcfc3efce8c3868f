#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "reinverify/breakpoints.hpp"
#include "reinverify/network.hpp"

namespace reinverify {

/// Action side of a property: a required interval for continuous actions, or
/// a discrete avoid/require set.
struct ActionConstraint {
    enum class Kind { Interval, AvoidDiscrete, RequireDiscrete };
    Kind kind = Kind::Interval;
    double lower = 0, upper = 0;   // Interval
    std::vector<int> actions;      // discrete ids

    bool satisfied(const std::vector<double>& action) const;
    bool satisfied(int action) const;
};

enum class PropertyKind { ActionAvoidance, DestinationReach };

/// Interval form of a property: per-feature state bounds nested inside the
/// environment bounds, plus the action constraint.
struct PropertyBox {
    std::vector<double> state_lower, state_upper;
    std::vector<double> env_lower, env_upper;
    ActionConstraint action;
    PropertyKind kind = PropertyKind::ActionAvoidance;

    int dims() const { return static_cast<int>(state_lower.size()); }
    void validate() const;
    bool contains(const std::vector<double>& state) const;
};

/// Per-feature output-fluctuation weights measured at the property bounds.
struct DensityPair {
    std::vector<double> lower;  // rho at the lower bound, per feature
    std::vector<double> upper;  // rho at the upper bound, per feature
    double epsilon = 0;
    std::string network_snapshot;
};

struct ShapingConfig {
    double p1 = 1;           // penalty intensity
    double p2 = 2;           // norm degree
    double lambda = 0.99;    // traceback discount
    double mu = 0;           // traceback decay
    double beta = 1;         // global scale
    double density_eps = 0.01;
    double fixed_action_dist = 1;  // action distance for discrete actions
    bool action_interval_dist = false;
};

enum class Side { Lower, Upper };

/// Max output movement along a one-sided epsilon segment at the property
/// boundary of feature j; other features pinned at the lower bounds. Exact
/// for piecewise-linear networks via subdivision at ReLU kinks.
double density(const Network& net, const PropertyBox& box, int feature, Side side, double eps);

/// Sampling fallback for the same quantity (oracle mode).
double density_sampled(const Network& net, const PropertyBox& box, int feature, Side side,
                       double eps, int samples);

DensityPair measure_densities(const Network& net, const PropertyBox& box, double eps,
                              const std::string& snapshot_id = "");

/// Density-weighted middle with environment-boundary overrides.
double exact_middle(const PropertyBox& box, const DensityPair& densities, int feature);

std::vector<double> exact_middles(const PropertyBox& box, const DensityPair& densities);

/// Normalized 1-D distance in [0,1]: 0 outside the property interval, 1 at
/// the middle.
double dist_1d(const PropertyBox& box, double middle, int feature, double value, double p1);

/// Density-weighted lp-norm distance, normalized so the all-middles state
/// scores exactly 1. States outside the box score 0.
double dist_nd(const PropertyBox& box, const DensityPair& densities,
               const std::vector<double>& middles, const std::vector<double>& state, double p2);

struct ActionInput {
    std::variant<int, std::vector<double>> value;
};

/// Signed violation(-)/satisfaction(+) magnitude.
double diff(const PropertyBox& box, const DensityPair& densities,
            const std::vector<double>& middles, const std::vector<double>& state,
            const ActionInput& action, const ShapingConfig& cfg);

struct GapOptions {
    double initial_halfwidth = 10;
    double precision = 0.01;
    double cap_halfwidth = 640;
    bool relax_downward = true;  // relax by lowering the parameter
};

struct GapResult {
    double gap = 0;
    bool expanded = false;
    bool exhausted = false;
    int expansions = 0;
    std::optional<double> breakpoint_value;
};

/// Minimal parameter distance between the stated property and the strictest
/// relaxation the network satisfies, found via breakpoint search over the
/// relaxation parameter. The search interval starts at initial_halfwidth and
/// is quadrupled until a breakpoint is found or the cap is reached.
GapResult gap(const drlp::Template& relaxation_template, const std::string& parameter,
              double predefined_value, const GapOptions& opts, const VerifyFn& verify_fn);

/// Default learning-rate schedule 1/(1+exp(-g)).
double lr_sigmoid(double gap_value);

double lr_coupled_diff(double gap_value, double diff_value,
                       const std::function<double(double)>& lr = lr_sigmoid);

/// Backward reward adjustment. Out-of-range terms are zero. With mu=0 and
/// destination-reach the result is the potential-based form
/// lambda*F[t+1] - F[t].
std::vector<double> traceback(const std::vector<double>& f, PropertyKind kind, double lambda,
                              double mu);

struct TrajectoryStep {
    std::vector<double> state;
    ActionInput action;
    double reward = 0;
};

using Trajectory = std::vector<TrajectoryStep>;

struct ShapedStep {
    double reward_original = 0;
    double reward_shaped = 0;
    std::vector<double> per_property_f;  // traced intermediate rewards
};

struct PropertyPipeline {
    PropertyBox box;
    DensityPair densities;
    std::vector<double> middles;
    double weight = 1;
    double gap_value = 0;
    bool single_step = false;  // one-shot properties skip the traceback
};

std::vector<ShapedStep> shape_rewards(const Trajectory& traj,
                                      const std::vector<PropertyPipeline>& properties,
                                      const ShapingConfig& cfg);

/// Scale suggestion: median |r| over median |sum w*F~|.
double suggest_beta(const Trajectory& traj, const std::vector<PropertyPipeline>& properties,
                    const ShapingConfig& cfg);

/// Interval form of a concrete one-shot script: x[0] bounds become the state
/// box and the post-condition is recognized as either an output interval or
/// an argmax avoid/require pattern.
PropertyBox property_box_from_script(const drlp::Script& script,
                                     const std::vector<double>& env_lower,
                                     const std::vector<double>& env_upper, PropertyKind kind);

}  // namespace reinverify
