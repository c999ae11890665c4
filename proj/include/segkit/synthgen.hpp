#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segkit/design.hpp"
#include "segkit/frame.hpp"
#include "segkit/segregation.hpp"

namespace segkit {

struct SectorSpec {
  std::string code;
  std::string name;
  // sector's share of male and of female employment, any common scale
  double size_male = 0.0;
  double size_female = 0.0;
  std::vector<double> female_share;  // one per period
  std::array<double, 9> occupation_male{};  // occupation weights within the sector
  std::array<double, 9> occupation_female{};
};

// Per-gender moments and covariate probabilities. Index 0 is female, 1 male.
struct GenderSpec {
  double mean_log_wage = 2.5;
  double sigma = 0.45;
  double part_time_share = 0.2;
  double part_time_hours = 18.0;
  double full_time_hours = 40.0;
  double part_time_hours_sd = 5.0;
  double full_time_hours_sd = 6.0;
  double participation = 0.75;
  double p_incouple = 0.5;
  double p_kids = 0.3;
  double p_training = 0.3;
  double p_public = 0.2;
  double p_benefit = 0.3;
  double p_eea = 0.05;
  double p_non_eea = 0.1;
  double p_educ = 0.4;  // yrseduc = 10 + Binomial(8, p_educ)
  std::array<double, 4> ethnicity{0.88, 0.03, 0.05, 0.04};  // white, black, asian, other
  std::vector<std::pair<std::string, double>> wage_slopes;  // by design column name
};

struct DgpSpec {
  std::uint64_t seed = 20240601;
  std::size_t n_workers = 200000;
  int first_year = 2005;
  std::size_t n_periods = 16;
  std::vector<SectorSpec> sectors;
  double sector_mix = 0.5;  // weight of female sizes in the sector size blend
  std::vector<std::string> high_segregation;  // sector codes labelled High
  std::array<GenderSpec, 2> gender;
  double tau = -0.094;  // log-wage effect of working in a female-dominated sector
  bool heteroskedastic = false;
  // latent index for entering a female-dominated sector, by covariate name
  std::vector<std::pair<std::string, double>> sector_selection;
  double part_time_kids_loading = 1.0;
  double inactive_kids_shift = 0.15;
  double inactive_benefit_shift = 0.2;
  double cpi_growth = 0.02;
  int cpi_base_year = 2015;
};

// Covariate names a wage slope may refer to.
const std::vector<std::string>& wage_covariates();

struct KboTruth {
  double overall = 0.0;
  double endowment = 0.0;
  double coefficient = 0.0;
  double interaction = 0.0;
};

struct GroundTruth {
  // "(Intercept)", the slopes in wage_covariates() order, then "fd"
  std::vector<std::string> names;
  std::array<Eigen::VectorXd, 2> beta;    // per gender
  std::array<Eigen::VectorXd, 2> mean_x;  // population covariate means of workers
  double att = 0.0;
  double ate = 0.0;
  std::vector<Dominance> dominance;  // pooled label per sector
  std::vector<Degree> degree;
  std::vector<std::array<double, 2>> ssi;  // per period {fd, md}
  KboTruth kbo;  // men (a) against women (b) on the wage formula
  std::vector<double> female_share;  // realised pooled share per sector
  double overall_female_share = 0.0;
};

struct Synthetic {
  Frame frame;
  SectorPanel panel;
  GroundTruth truth;
};

/// Throws InvalidSpec on a malformed spec.
void validate_spec(const DgpSpec& spec);

// Wage formula whose columns line up with GroundTruth::names.
std::string wage_formula(const DgpSpec& spec);

/// Person-level panel of workers and inactive persons with planted truth.
Synthetic generate(const DgpSpec& spec);

/// Default spec matched to the UK LFS 2005-2020 sector mix and summary means.
DgpSpec calibrate_to_paper();

// Two Gaussian groups with a known threefold decomposition.
struct KboSimSpec {
  std::size_t n_a = 25000;
  std::size_t n_b = 25000;
  int k = 4;
  double intercept_shift = 0.0;  // beta_a - beta_b in the intercept
  double mean_shift = 0.0;       // mean of x_a - mean of x_b, every slope covariate
  double sigma = 0.5;
  std::uint64_t seed = 1;
};

struct KboSim {
  Eigen::VectorXd y_a, y_b;
  DesignMatrix X_a, X_b;
  KboTruth truth;
};

KboSim simulate_kbo(const KboSimSpec& spec);

// Probit selection on observables with a constant treatment effect.
struct TreatmentSimSpec {
  std::size_t n = 20000;
  int k = 3;
  double tau = 0.5;
  double selection_intercept = -0.3;
  double sigma = 1.0;
  std::uint64_t seed = 1;
};

struct TreatmentSim {
  Frame frame;  // d, y, x1..xk
  Eigen::VectorXd true_score;
  std::string pscore_formula;  // "d ~ x1 + ... + xk"
};

TreatmentSim simulate_treatment(const TreatmentSimSpec& spec);

}  // namespace segkit
