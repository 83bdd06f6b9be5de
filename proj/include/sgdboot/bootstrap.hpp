#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include <json.hpp>

#include "sgdboot/linearization.hpp"
#include "sgdboot/model.hpp"
#include "sgdboot/schedule.hpp"
#include "sgdboot/sgd_core.hpp"

namespace sgdboot {

// W = a + b X with X ~ Beta(alpha_shape, beta_shape), so that E W = Var W = 1.
struct BoundedWeightLaw {
  double alpha_shape = 0.5;
  double beta_shape = 2.0;
  double a = 0.0;
  double b = 0.0;
  double wmin = 0.0;
  double wmax = 0.0;
  bool degenerate = false;  // w == 1, testing hook only
};

BoundedWeightLaw make_weight_law(double alpha_shape, double beta_shape);
BoundedWeightLaw unit_weight_law();

class WeightSampler {
 public:
  explicit WeightSampler(const BoundedWeightLaw& law);
  double operator()(SplitMix64& eng);

 private:
  static double half_integer_gamma(double shape, SplitMix64& eng);

  BoundedWeightLaw law_;
  std::gamma_distribution<double> ga_, gb_;
  bool exact_a_, exact_b_;
};

class ReplicateDivergedError : public DivergedError {
 public:
  ReplicateDivergedError(long replicate, long step);
  long replicate() const { return replicate_; }

 private:
  long replicate_;
};

struct BootstrapEnsemble {
  long m = 0;
  long n = 0;
  std::vector<VectorXd> roots;  // sqrt(n) (theta_bar^b - theta_bar)
  VectorXd center;              // theta_bar
  std::uint64_t data_key = 0;
  std::uint64_t master_key = 0;
  std::vector<std::uint64_t> weight_keys;
};

// theta^b_k = theta^b_{k-1} - alpha_k w_k F(theta^b_{k-1}, xi_k), theta^b_0 = theta_0.
// Returns sqrt(n) (theta_bar^b - theta_bar).
VectorXd run_bootstrap_replicate(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                 const VectorXd& theta0, std::uint64_t data_key, const BoundedWeightLaw& law,
                                 std::uint64_t weight_key);

VectorXd run_bootstrap_replicate_on_tape(const ProblemSpec& p, const StepSchedule& s,
                                         const std::vector<NoiseSample>& tape, const VectorXd& theta0,
                                         const VectorXd& theta_bar, const BoundedWeightLaw& law,
                                         std::uint64_t weight_key);

// Weight key of replicate j (1-based) is substream(master_key, j).
// threads <= 0 uses the OpenMP default.
BootstrapEnsemble build_ensemble(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                 const VectorXd& theta0, std::uint64_t data_key, const BoundedWeightLaw& law,
                                 std::uint64_t master_key, long m, int threads = 0);

BootstrapEnsemble build_ensemble_serial(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                        const VectorXd& theta0, std::uint64_t data_key,
                                        const BoundedWeightLaw& law, std::uint64_t master_key, long m);

BootstrapEnsemble build_ensemble_on_tape(const ProblemSpec& p, const StepSchedule& s,
                                         const std::vector<NoiseSample>& tape, const VectorXd& theta0,
                                         const VectorXd& theta_bar, const BoundedWeightLaw& law,
                                         std::uint64_t master_key, long m, int threads = 1);

enum class RegionShape { NormBall, CoordinateBox };

const char* to_string(RegionShape s);

struct ConfidenceRegion {
  RegionShape shape = RegionShape::NormBall;
  double level = 0.9;
  VectorXd center;
  double radius = 0.0;   // NormBall
  VectorXd halfwidths;   // CoordinateBox

  bool contains(const VectorXd& x) const;
};

// Quantile = order statistic ceil(level * m), clamped to [1, m].
ConfidenceRegion confidence_region(const BootstrapEnsemble& e, RegionShape shape, double level);

// n^{-1} sum_{i=1}^{n-1} Q_i eta_i eta_i' Q_i'; etas[i-1] holds eta_i.
MatrixXd sigma_n_boot(const QFamily& qf, const std::vector<VectorXd>& etas);
MatrixXd sigma_n_boot(const QFamily& qf, const NoiseOracle& o, std::uint64_t data_key);

// Columns replicate, root[0..d-1].
void write_ensemble_csv(std::ostream& os, const BootstrapEnsemble& e);
// {shape, level, center, radius_or_halfwidths}
nlohmann::json region_to_json(const ConfidenceRegion& r);

}  // namespace sgdboot
