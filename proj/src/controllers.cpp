#include "anc/controllers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "anc/metrics.hpp"

namespace anc {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 6> kAlgorithmNames{{
    {Algorithm::decentralized_fxlms, "decentralized-fxlms"},
    {Algorithm::leaky, "leaky"},
    {Algorithm::wcfxlms, "wcfxlms"},
    {Algorithm::sb_wcfxlms, "sb-wcfxlms"},
    {Algorithm::centralized, "centralized"},
    {Algorithm::collocated_centralized, "collocated-centralized"},
}};

}  // namespace

std::string_view to_string(Algorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames)
    if (alg == a) return name;
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view s) {
  for (const auto& [alg, name] : kAlgorithmNames)
    if (name == s) return alg;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

NodeController::NodeController(Algorithm algorithm, FirResponse model, const NodeParams& params)
    : algorithm_(algorithm),
      model_(std::move(model)),
      params_(params),
      w_(params.taps, 0.0),
      center_(params.taps, 0.0),
      zero_center_(params.taps, 0.0),
      x_(std::max(params.taps, model_.size())),
      fx_(params.taps) {
  if (is_centralized(algorithm)) throw std::invalid_argument("centralized algorithms use CentralizedController");
  if (params.taps == 0) throw std::invalid_argument("control filter needs at least one tap");
  if (model_.empty()) throw std::invalid_argument("secondary-path model is empty");
  if (!(params.mu >= 0.0) || !std::isfinite(params.mu)) throw std::invalid_argument("step size must be finite and >= 0");
  if (!(params.alpha >= 0.0) || !std::isfinite(params.alpha))
    throw std::invalid_argument("penalty factor must be finite and >= 0");
  if (algorithm != Algorithm::sb_wcfxlms) params_.boost_window = 0;
}

double NodeController::control_output(double x) {
  x_.push(x);
  if (diverged_) return 0.0;
  return dot(w_, x_.window(params_.taps));
}

double NodeController::filtered_reference_step() {
  const double fx = dot(model_.taps, x_.window(model_.size()));
  fx_.push(fx);
  return fx;
}

void NodeController::apply_update(double e, std::span<const double> center, double mu_alpha) {
  const double mu_e = params_.mu * e;
  const auto fx = fx_.window();
  double check = 0.0;
  if (center.empty()) {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      w_[i] += mu_e * fx[i];
      check += w_[i];
    }
  } else {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      w_[i] += mu_e * fx[i] + mu_alpha * (center[i] - w_[i]);
      check += w_[i];
    }
  }
  if (!std::isfinite(check)) diverged_ = true;
}

void NodeController::fxlms_update(double e) {
  if (diverged_) return;
  apply_update(e, {}, 0.0);
}

void NodeController::wcfxlms_update(double e) {
  if (diverged_) return;
  apply_update(e, center_, params_.mu * params_.alpha);
}

void NodeController::leaky_fxlms_update(double e) {
  if (diverged_) return;
  apply_update(e, zero_center_, params_.mu * params_.alpha);
}

std::optional<BoostEvent> NodeController::self_boost_tick(double e, std::size_t n) {
  if (params_.boost_window == 0) return std::nullopt;
  eta_sum_ += rnl(e);
  if (++eta_count_ < params_.boost_window) return std::nullopt;

  const double eta_bar = eta_sum_ / static_cast<double>(params_.boost_window);
  eta_sum_ = 0.0;
  eta_count_ = 0;
  if (diverged_ || !(eta_bar < eta_min_)) return std::nullopt;
  BoostEvent ev{n, eta_min_, eta_bar};
  std::copy(w_.begin(), w_.end(), center_.begin());
  ++center_version_;
  eta_min_ = eta_bar;
  ++boosts_;
  return ev;
}

std::optional<BoostEvent> NodeController::adapt(double e, std::size_t n) {
  switch (algorithm_) {
    case Algorithm::decentralized_fxlms:
      fxlms_update(e);
      break;
    case Algorithm::leaky:
      leaky_fxlms_update(e);
      break;
    case Algorithm::wcfxlms:
    case Algorithm::sb_wcfxlms:
      wcfxlms_update(e);
      break;
    default:
      break;
  }
  return self_boost_tick(e, n);
}

void NodeController::set_weights(std::span<const double> w) {
  if (w.size() != w_.size()) throw std::invalid_argument("weight vector has the wrong length");
  std::copy(w.begin(), w.end(), w_.begin());
}

void NodeController::set_center(std::span<const double> w) {
  if (w.size() != center_.size()) throw std::invalid_argument("centre filter has the wrong length");
  std::copy(w.begin(), w.end(), center_.begin());
  ++center_version_;
}

// ---------------------------------------------------------------------------

CentralizedController::CentralizedController(const PathSet& paths, std::size_t taps, std::vector<double> mu,
                                             bool collocated)
    : K_(paths.nodes), taps_(taps), model_len_(1), mu_(std::move(mu)) {
  if (!paths.has_full_estimates()) throw std::invalid_argument("centralized control needs the full estimate matrix");
  if (taps == 0) throw std::invalid_argument("control filter needs at least one tap");
  if (mu_.size() != K_) throw std::invalid_argument("one step size per source is required");
  models_ = paths.estimates;
  model_active_.assign(K_, std::vector<char>(K_, 0));
  for (std::size_t k = 0; k < K_; ++k)
    for (std::size_t m = 0; m < K_; ++m) {
      model_active_[k][m] = models_[k][m].is_zero() ? 0 : 1;
      model_len_ = std::max(model_len_, models_[k][m].size());
    }
  refs_.resize(K_);
  for (std::size_t m = 0; m < K_; ++m) {
    if (collocated)
      for (std::size_t j = 0; j < K_; ++j) refs_[m].push_back(j);
    else
      refs_[m].push_back(m);
  }
  const std::size_t J = refs_.front().size();
  x_.assign(K_, DelayLine(std::max(taps, model_len_)));
  fx_.assign(K_ * K_ * J, DelayLine(taps));
  w_.assign(K_, std::vector<std::vector<double>>(J, std::vector<double>(taps, 0.0)));
}

void CentralizedController::control_outputs(std::span<const double> x, std::span<double> y) {
  const std::size_t J = refs_.front().size();
  for (std::size_t j = 0; j < K_; ++j) x_[j].push(x[j]);
  for (std::size_t m = 0; m < K_; ++m) {
    double acc = 0.0;
    if (!diverged_)
      for (std::size_t s = 0; s < J; ++s) acc += dot(w_[m][s], x_[refs_[m][s]].window(taps_));
    y[m] = acc;
  }
  for (std::size_t k = 0; k < K_; ++k)
    for (std::size_t m = 0; m < K_; ++m)
      for (std::size_t s = 0; s < J; ++s) {
        auto& line = fx_[(k * K_ + m) * J + s];
        const auto& model = models_[k][m];
        line.push(model_active_[k][m] ? dot(model.taps, x_[refs_[m][s]].window(model.size())) : 0.0);
      }
}

void CentralizedController::update(std::span<const double> e) {
  if (diverged_) return;
  const std::size_t J = refs_.front().size();
  double check = 0.0;
  for (std::size_t m = 0; m < K_; ++m)
    for (std::size_t s = 0; s < J; ++s) {
      auto& w = w_[m][s];
      for (std::size_t k = 0; k < K_; ++k) {
        if (!model_active_[k][m]) continue;
        const double mu_e = mu_[m] * e[k];
        const auto fx = fx_[(k * K_ + m) * J + s].window();
        for (std::size_t i = 0; i < taps_; ++i) w[i] += mu_e * fx[i];
      }
      for (double v : w) check += v;
    }
  if (!std::isfinite(check)) diverged_ = true;
}

std::span<const double> CentralizedController::weights(std::size_t source, std::size_t ref_slot) const {
  return w_.at(source).at(ref_slot);
}

}  // namespace anc
