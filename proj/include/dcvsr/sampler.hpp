#pragma once

#include <functional>
#include <vector>

#include "dcvsr/tensor.hpp"

// EDM noise schedule, denoiser preconditioning and deterministic ODE steps.
namespace dcvsr {

struct SigmaSchedule {
    std::vector<double> sigmas;  // T + 1 strictly descending levels
    double sigma_max = 700.0;
    double sigma_min = 0.002;
    double exponent  = 7.0;

    int steps() const { return static_cast<int>(sigmas.size()) - 1; }
};

SigmaSchedule build_sigma_schedule(int steps, double sigma_min = 0.002, double sigma_max = 700.0,
                                   double exponent = 7.0);

struct Precondition {
    double c_skip  = 1.0;
    double c_out   = 0.0;
    double c_in    = 1.0;
    double c_noise = 0.0;
};

Precondition precondition(double sigma, double sigma_data = 0.5);

// Euler step of dx/dsigma = (x - D) / sigma.
VideoTensor ode_step(const VideoTensor& x, const VideoTensor& denoised, double sigma_cur, double sigma_next);
// Same step expressed with eps = (x - D) / sigma.
VideoTensor euler_step_eps(const VideoTensor& x, const VideoTensor& eps, double sigma_cur, double sigma_next);

enum class OdeSolver { euler, heun };

using DenoiseFn = std::function<VideoTensor(const VideoTensor& x, double sigma)>;

// Integrates from sigmas[0] to sigmas[T]. Heun applies the trapezoidal
// correction on every step whose target sigma is positive.
VideoTensor sample_ode(const VideoTensor& x_init, const DenoiseFn& denoise, const SigmaSchedule& schedule,
                       OdeSolver solver = OdeSolver::euler);

}  // namespace dcvsr
