#include "galopp/loc.hpp"

#include <cmath>

namespace galopp
{

bool is_symmetric_psd(const Matrix2& m, double tol)
{
    if (!m.allFinite())
        return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, m.cwiseAbs().maxCoeff()))
        return false;
    const Eigen::SelfAdjointEigenSolver<Matrix2> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

KalmanState kf_predict(const KalmanState& prior, const Vector2& control, const MotionModel& motion)
{
    if (!is_symmetric_psd(prior.cov))
        throw std::invalid_argument("kf_predict: covariance is not symmetric PSD");
    KalmanState out;
    out.mean = motion.transition * prior.mean + motion.control * control;
    out.cov = motion.transition * prior.cov * motion.transition.transpose() + motion.process_noise;
    return out;
}

Matrix2 build_observation_matrix(const Vector2& relative, const Vector2& observed_true)
{
    const Vector2 denom = observed_true - relative;
    if (std::abs(denom.x()) < 1e-9 || std::abs(denom.y()) < 1e-9)
        throw SingularObservation("observation matrix has a zero denominator");
    Matrix2 c = Matrix2::Zero();
    c(0, 0) = relative.x() / denom.x();
    c(1, 1) = relative.y() / denom.y();
    return c;
}

KalmanState kf_update(const KalmanState& predicted, const Vector2& measurement, const ObservationModel& obs)
{
    if (!is_symmetric_psd(predicted.cov))
        throw std::invalid_argument("kf_update: covariance is not symmetric PSD");
    const Matrix2& c = obs.observation;
    const Matrix2 s = c * predicted.cov * c.transpose() + obs.measurement_noise;
    const Eigen::FullPivLU<Matrix2> lu(s);
    if (!lu.isInvertible())
        throw std::domain_error("kf_update: innovation covariance is singular");
    const Matrix2 gain = predicted.cov * c.transpose() * lu.inverse();

    KalmanState out;
    out.mean = predicted.mean + gain * (measurement - c * predicted.mean);
    const Matrix2 cov = (Matrix2::Identity() - gain * c) * predicted.cov;
    out.cov = 0.5 * (cov + cov.transpose());
    return out;
}

KalmanState kf_step(const KalmanState& prior, const Vector2& control,
                    const std::optional<Vector2>& measurement, const MotionModel& motion,
                    const ObservationModel& obs)
{
    const KalmanState predicted = kf_predict(prior, control, motion);
    if (!measurement)
        return predicted;
    return kf_update(predicted, *measurement, obs);
}

std::vector<AgentState> resolve_localization(std::vector<AgentState> agents, const ConnectivityGraph& graph,
                                             const Matrix2& reset_cov)
{
    if (static_cast<int>(agents.size()) != graph.n)
        throw std::invalid_argument("resolve_localization: graph size differs from agent count");
    for (std::size_t i = 0; i < agents.size(); ++i)
    {
        AgentState& a = agents[i];
        a.localized = a.role == Role::anchor || graph.anchor_reachable[i];
        if (a.localized)
        {
            a.belief.mean = Vector2(a.position.x, a.position.y);
            a.belief.cov = a.role == Role::anchor ? Matrix2::Zero() : reset_cov;
        }
    }
    return agents;
}

} // namespace galopp
