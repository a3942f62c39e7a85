#include "dcvsr/sampler.hpp"

#include <cmath>
#include <string>

namespace dcvsr {

SigmaSchedule build_sigma_schedule(int steps, double sigma_min, double sigma_max, double exponent) {
    if (steps < 1) throw ConfigError("sigma schedule: steps must be >= 1");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max)) throw ConfigError("sigma schedule: need 0 < sigma_min < sigma_max");
    if (!(exponent > 0.0)) throw ConfigError("sigma schedule: exponent must be > 0");
    SigmaSchedule s;
    s.sigma_max = sigma_max;
    s.sigma_min = sigma_min;
    s.exponent  = exponent;
    s.sigmas.resize(steps + 1);
    const double hi = std::pow(sigma_max, 1.0 / exponent);
    const double lo = std::pow(sigma_min, 1.0 / exponent);
    for (int i = 0; i <= steps; ++i) {
        s.sigmas[i] = std::pow(hi + (static_cast<double>(i) / steps) * (lo - hi), exponent);
    }
    // Pin the endpoints against pow round-off.
    s.sigmas.front() = sigma_max;
    s.sigmas.back()  = sigma_min;
    return s;
}

Precondition precondition(double sigma, double sigma_data) {
    const double total = sigma * sigma + sigma_data * sigma_data;
    Precondition p;
    p.c_skip  = sigma_data * sigma_data / total;
    p.c_out   = sigma * sigma_data / std::sqrt(total);
    p.c_in    = 1.0 / std::sqrt(total);
    p.c_noise = std::log(sigma) / 4.0;
    return p;
}

namespace {

void check_sigmas(double sigma_cur, double sigma_next) {
    if (!(sigma_cur > 0.0) || !(sigma_next >= 0.0) || sigma_next > sigma_cur) {
        throw DimensionError("ode_step: need sigma_cur > 0 and 0 <= sigma_next <= sigma_cur, got " +
                             std::to_string(sigma_cur) + " -> " + std::to_string(sigma_next));
    }
}

}  // namespace

VideoTensor ode_step(const VideoTensor& x, const VideoTensor& denoised, double sigma_cur, double sigma_next) {
    check_sigmas(sigma_cur, sigma_next);
    require_same_shape(x, denoised, "ode_step");
    VideoTensor out(x.shape());
    const double h = sigma_next - sigma_cur;
    for (size_t i = 0; i < x.size(); ++i) {
        const double xv  = x.values()[i];
        out.values()[i] = static_cast<float>(xv + h * (xv - denoised.values()[i]) / sigma_cur);
    }
    return out;
}

VideoTensor euler_step_eps(const VideoTensor& x, const VideoTensor& eps, double sigma_cur, double sigma_next) {
    check_sigmas(sigma_cur, sigma_next);
    require_same_shape(x, eps, "euler_step_eps");
    VideoTensor out(x.shape());
    const double h = sigma_next - sigma_cur;
    for (size_t i = 0; i < x.size(); ++i) {
        out.values()[i] = static_cast<float>(x.values()[i] + h * static_cast<double>(eps.values()[i]));
    }
    return out;
}

VideoTensor sample_ode(const VideoTensor& x_init, const DenoiseFn& denoise, const SigmaSchedule& schedule,
                       OdeSolver solver) {
    VideoTensor x = x_init;
    const auto& sig = schedule.sigmas;
    std::vector<double> slope(x.size());
    for (int i = 0; i < schedule.steps(); ++i) {
        const double s0 = sig[i], s1 = sig[i + 1];
        check_sigmas(s0, s1);
        const VideoTensor d0 = denoise(x, s0);
        require_same_shape(x, d0, "sample_ode");
        for (size_t j = 0; j < x.size(); ++j) slope[j] = (static_cast<double>(x.values()[j]) - d0.values()[j]) / s0;

        VideoTensor next(x.shape());
        for (size_t j = 0; j < x.size(); ++j) next.values()[j] = static_cast<float>(x.values()[j] + (s1 - s0) * slope[j]);

        if (solver == OdeSolver::heun && s1 > 0.0) {
            const VideoTensor d1 = denoise(next, s1);
            for (size_t j = 0; j < x.size(); ++j) {
                const double slope1 = (static_cast<double>(next.values()[j]) - d1.values()[j]) / s1;
                next.values()[j]    = static_cast<float>(x.values()[j] + (s1 - s0) * 0.5 * (slope[j] + slope1));
            }
        }
        if (!next.all_finite()) throw NumericError("sample_ode: non-finite latent at step " + std::to_string(i));
        x = std::move(next);
    }
    return x;
}

}  // namespace dcvsr
