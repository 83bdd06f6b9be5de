#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "sgdboot/model.hpp"
#include "sgdboot/schedule.hpp"

namespace sgdboot {

class DivergedError : public std::runtime_error {
 public:
  DivergedError(long step, const std::string& what);
  long step() const { return step_; }

 private:
  long step_;
};

inline constexpr double kDivergenceNorm = 1e12;

struct TraceRecord {
  long k = 0;
  VectorXd theta;  // theta_k
  VectorXd eta;    // eta(xi_k); zero for k = 0
  VectorXd g;      // g(theta_{k-1}, xi_k); zero for k = 0
  double alpha = 0.0;
};

struct SgdOptions {
  bool trace = false;
  std::vector<long> checkpoints;   // record theta_k at these k
  std::vector<long> prefix_means;  // record (1/m) sum_{i<m} theta_i at these m
};

struct SgdRun {
  long n = 0;
  VectorXd theta_bar;
  VectorXd theta_last;
  VectorXd theta0;
  std::uint64_t data_key = 0;
  std::vector<TraceRecord> trace;
  std::vector<std::pair<long, VectorXd>> checkpoints;
  std::vector<std::pair<long, VectorXd>> prefix_means;
};

// xi_k for k >= 1, drawn from SplitMix64(substream(data_key, k)).
NoiseSample replay_noise(const NoiseOracle& o, std::uint64_t data_key, long k);

// xi_1 .. xi_{n-1}; element k-1 holds xi_k.
std::vector<NoiseSample> record_noise(const NoiseOracle& o, std::uint64_t data_key, long n);

// theta_k = theta_{k-1} - alpha_k (grad f(theta_{k-1}) + eta(xi_k) + g(theta_{k-1}, xi_k)), k = 1..n-1;
// theta_bar = mean of theta_0 .. theta_{n-1}.
SgdRun run_sgd(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n, const VectorXd& theta0,
               std::uint64_t data_key, const SgdOptions& opts = {});

SgdRun run_sgd_on_tape(const ProblemSpec& p, const StepSchedule& s, const std::vector<NoiseSample>& tape,
                       const VectorXd& theta0, const SgdOptions& opts = {});

// Columns k, theta[0..d-1], alpha_k.
void write_trace_csv(std::ostream& os, const SgdRun& run);

}  // namespace sgdboot
