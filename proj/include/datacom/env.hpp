#pragma once

#include <Eigen/Dense>
#include <memory>

#include <json.hpp>

#include "datacom/rng.hpp"

namespace datacom {

struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    double cost = 0.0;  // constraint value k(s'), may be negative when safe
    bool absorbing = false;
};

// Dynamics-mismatch injection (unmodelled damping + Gaussian noise). The
// zero spec applies no damping and draws nothing from the rng, so nominal
// runs are bitwise unaffected.
struct DisturbanceSpec {
    double damping = 0.0;    // sigma_d
    double noise_std = 0.0;  // sigma_n

    bool active() const { return damping != 0.0 || noise_std != 0.0; }
};

inline double apply_disturbance(const DisturbanceSpec& spec, double nominal_accel, double velocity,
                                Rng& rng) {
    double out = nominal_accel - spec.damping * velocity;
    if (spec.noise_std > 0.0) out += rng.normal(0.0, spec.noise_std);
    return out;
}

// Control-affine environment with analytic (f, G) in observation coordinates.
// The manifold layer always receives the NOMINAL dynamics; disturbances only
// perturb the simulation.
class Environment {
public:
    virtual ~Environment() = default;

    virtual int observation_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual Eigen::VectorXd action_bound() const = 0;  // symmetric box half-widths
    virtual int horizon() const = 0;
    virtual double k_max() const = 0;
    virtual double gamma_default() const { return 0.99; }

    virtual Eigen::VectorXd reset(Rng& rng) = 0;
    virtual StepResult step(const Eigen::VectorXd& action) = 0;
    virtual Eigen::VectorXd observation() const = 0;

    // nominal affine dynamics at the current internal state, observation coords
    virtual void dynamics(const Eigen::VectorXd& obs, Eigen::VectorXd& f,
                          Eigen::MatrixXd& g) const = 0;

    // hand-written constraint for the fixed-constraint variant
    virtual bool has_analytic_constraint() const { return false; }
    virtual void analytic_constraint(const Eigen::VectorXd& /*obs*/, Eigen::VectorXd& /*k*/,
                                     Eigen::MatrixXd& /*jacobian*/) const {}

    virtual nlohmann::json save_state() const = 0;
    virtual void load_state(const nlohmann::json& j) = 0;
    virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace datacom
