#pragma once

#include "galopp/comms.hpp"
#include "galopp/types.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace galopp
{

/// Gaussian position belief (cells, cells^2).
struct KalmanState
{
    Vector2 mean = Vector2::Zero();
    Matrix2 cov = Matrix2::Zero();
};

struct MotionModel
{
    Matrix2 transition = Matrix2::Identity();
    Matrix2 control = Matrix2::Identity();
    Matrix2 process_noise = 0.5 * Matrix2::Identity();
};

struct ObservationModel
{
    Matrix2 observation = Matrix2::Identity();
    Matrix2 measurement_noise = 1e-4 * Matrix2::Identity();
};

/// Raised when the relative-position observation matrix has a zero denominator.
struct SingularObservation : std::domain_error
{
    using std::domain_error::domain_error;
};

bool is_symmetric_psd(const Matrix2& m, double tol = 1e-9);

KalmanState kf_predict(const KalmanState& prior, const Vector2& control, const MotionModel& motion);

/// C = diag(x'/(x_a - x'), y'/(y_a - y')) where (x', y') is the relative
/// position of the observed agent and (x_a, y_a) its true position.
Matrix2 build_observation_matrix(const Vector2& relative, const Vector2& observed_true);

KalmanState kf_update(const KalmanState& predicted, const Vector2& measurement, const ObservationModel& obs);

/// Full filter step: predict, then update only when a measurement is present.
KalmanState kf_step(const KalmanState& prior, const Vector2& control,
                    const std::optional<Vector2>& measurement, const MotionModel& motion,
                    const ObservationModel& obs);

struct AgentState
{
    int id = 0;
    Role role = Role::auxiliary;
    Cell position;
    KalmanState belief;
    bool localized = true;
};

/// Anchors stay localized with the reset covariance; an auxiliary is localized
/// exactly when it is anchor-reachable. Every localized agent snaps its belief
/// to the true position.
std::vector<AgentState> resolve_localization(std::vector<AgentState> agents, const ConnectivityGraph& graph,
                                             const Matrix2& reset_cov = Matrix2::Zero());

} // namespace galopp
