#include "segkit/synthgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segkit/error.hpp"
#include "segkit/rng.hpp"

namespace segkit {

namespace {

constexpr int kFemale = 0;
constexpr int kMale = 1;
constexpr int kMinAge = 16;
constexpr int kMaxAge = 64;
constexpr int kEducTrials = 8;
constexpr double kExpLow = 0.75;
constexpr double kExpHigh = 1.25;

const std::vector<std::string> kSelectionFeatures{"age",      "yrseduc", "experience", "incouple",
                                                  "kids",     "training", "parttime",  "public",
                                                  "benefit",  "eea",      "non_eea"};

struct Person {
  int t = 0;
  int g = 0;
  bool inlf = true;
  double age = 0, yrseduc = 0, experience = 0;
  bool incouple = false, kids = false, training = false, pub = false, benefit = false, pt = false, fd = false;
  int nationality = 0;
  int ethnicity = 0;
  int sector = -1;
  int occupation = -1;
  double hours = 0.0;
  double ln_wage = 0.0;
};

double feature(const Person& p, const std::string& name) {
  if (name == "age") return p.age;
  if (name == "age^2") return p.age * p.age;
  if (name == "yrseduc") return p.yrseduc;
  if (name == "yrseduc^2") return p.yrseduc * p.yrseduc;
  if (name == "experience") return p.experience;
  if (name == "experience^2") return p.experience * p.experience;
  if (name == "incouple") return p.incouple;
  if (name == "kids") return p.kids;
  if (name == "training") return p.training;
  if (name == "parttime") return p.pt;
  if (name == "public") return p.pub;
  if (name == "benefit") return p.benefit;
  if (name == "nationality[EEA]" || name == "eea") return p.nationality == 1;
  if (name == "nationality[nonEEA]" || name == "non_eea") return p.nationality == 2;
  throw Error(ErrorCode::kInvalidSpec, fmt::format("unknown covariate '{}'", name));
}

// Largest-remainder apportionment of `total` in proportion to `weights`.
std::vector<long> apportion(long total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<long> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  long used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = sum > 0 ? static_cast<double>(total) * weights[i] / sum : 0.0;
    out[i] = static_cast<long>(std::floor(q));
    used += out[i];
    rem.emplace_back(q - std::floor(q), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long k = 0; k < total - used; ++k) ++out[rem[static_cast<std::size_t>(k) % rem.size()].second];
  return out;
}

double slope(const std::vector<std::pair<std::string, double>>& slopes, const std::string& name) {
  for (const auto& [n, v] : slopes)
    if (n == name) return v;
  return 0.0;
}

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidSpec, fmt::format("{} = {} is not a probability", what, p));
}

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidSpec, fmt::format("{} = {} must be positive", what, v));
}

// Population covariate means of workers, in wage_covariates() order.
Eigen::VectorXd covariate_means(const GenderSpec& g, double part_time_share) {
  const double educ = 10.0 + kEducTrials * g.p_educ;
  const double educ_sq = kEducTrials * g.p_educ * (1.0 - g.p_educ) + educ * educ;
  const double span = kMaxAge - kMinAge;
  const double age = (kMinAge + kMaxAge) / 2.0;
  const double age_var = ((span + 1) * (span + 1) - 1) / 12.0;
  const double u_mean = (kExpLow + kExpHigh) / 2.0;
  const double u_sq = (kExpHigh - kExpLow) * (kExpHigh - kExpLow) / 12.0 + u_mean * u_mean;
  const double t_mean = span / 2.0;
  const double t_sq = age_var + t_mean * t_mean;
  Eigen::VectorXd m(13);
  m << age, age_var + age * age, educ, educ_sq, t_mean * u_mean, t_sq * u_sq, g.p_incouple, g.p_kids, g.p_training,
      part_time_share, g.p_public, g.p_eea, g.p_non_eea;
  return m;
}

void draw_covariates(Person& p, const GenderSpec& g, CounterRng& rng, double kids_shift, double benefit_shift) {
  p.age = rng.uniform_int(kMinAge, kMaxAge);
  p.yrseduc = 10 + rng.binomial(kEducTrials, g.p_educ);
  p.experience = (p.age - kMinAge) * rng.uniform(kExpLow, kExpHigh);
  p.incouple = rng.bernoulli(g.p_incouple);
  p.kids = rng.bernoulli(std::min(1.0, g.p_kids + kids_shift));
  p.training = rng.bernoulli(g.p_training);
  p.pub = rng.bernoulli(g.p_public);
  p.benefit = rng.bernoulli(std::min(1.0, g.p_benefit + benefit_shift));
  const double nat[3] = {1.0 - g.p_eea - g.p_non_eea, g.p_eea, g.p_non_eea};
  p.nationality = static_cast<int>(rng.categorical(nat));
  p.ethnicity = static_cast<int>(rng.categorical(g.ethnicity));
}

}  // namespace

const std::vector<std::string>& wage_covariates() {
  static const std::vector<std::string> names{"age",      "age^2", "yrseduc",  "yrseduc^2", "experience",
                                              "experience^2", "incouple", "kids", "training", "parttime",
                                              "public",   "nationality[EEA]", "nationality[nonEEA]"};
  return names;
}

std::string wage_formula(const DgpSpec&) {
  return "ln_wage ~ age + age^2 + yrseduc + yrseduc^2 + experience + experience^2 + incouple + kids + training + "
         "parttime + public + nationality + fd";
}

void validate_spec(const DgpSpec& spec) {
  if (spec.n_periods == 0) throw Error(ErrorCode::kInvalidSpec, "n_periods must be positive");
  if (spec.sectors.size() < 2) throw Error(ErrorCode::kInvalidSpec, "need at least two sectors");
  if (spec.n_workers < 4 * spec.sectors.size() * spec.n_periods)
    throw Error(ErrorCode::kInvalidSpec, "n_workers is too small for the sector-period grid");
  check_probability(spec.sector_mix, "sector_mix");
  for (const auto& s : spec.sectors) {
    if (s.female_share.size() != spec.n_periods)
      throw Error(ErrorCode::kInvalidSpec, fmt::format("sector {} needs {} female shares", s.code, spec.n_periods));
    for (double f : s.female_share) check_probability(f, fmt::format("female share of {}", s.code));
    if (!(s.size_male >= 0 && s.size_female >= 0) || s.size_male + s.size_female <= 0)
      throw Error(ErrorCode::kInvalidSpec, fmt::format("sector {} has no size", s.code));
    for (const auto* occ : {&s.occupation_male, &s.occupation_female}) {
      double total = 0;
      for (double w : *occ) {
        if (!(w >= 0)) throw Error(ErrorCode::kInvalidSpec, fmt::format("negative occupation weight in {}", s.code));
        total += w;
      }
      if (total <= 0) throw Error(ErrorCode::kInvalidSpec, fmt::format("sector {} has no occupation weights", s.code));
    }
  }
  for (const auto& code : spec.high_segregation)
    if (std::none_of(spec.sectors.begin(), spec.sectors.end(), [&](const SectorSpec& s) { return s.code == code; }))
      throw Error(ErrorCode::kInvalidSpec, fmt::format("unknown sector '{}' in high_segregation", code));
  for (int g = 0; g < 2; ++g) {
    const auto& gs = spec.gender[g];
    const std::string who = g == kFemale ? "female" : "male";
    check_positive(gs.sigma, who + " sigma");
    check_positive(gs.part_time_hours, who + " part_time_hours");
    check_positive(gs.full_time_hours, who + " full_time_hours");
    check_positive(gs.part_time_hours_sd, who + " part_time_hours_sd");
    check_positive(gs.full_time_hours_sd, who + " full_time_hours_sd");
    check_positive(gs.participation, who + " participation");
    for (auto [p, name] : {std::pair{gs.part_time_share, "part_time_share"}, {gs.participation, "participation"},
                           {gs.p_incouple, "p_incouple"}, {gs.p_kids, "p_kids"}, {gs.p_training, "p_training"},
                           {gs.p_public, "p_public"}, {gs.p_benefit, "p_benefit"}, {gs.p_eea, "p_eea"},
                           {gs.p_non_eea, "p_non_eea"}, {gs.p_educ, "p_educ"}, {gs.p_eea + gs.p_non_eea, "p_eea + p_non_eea"}})
      check_probability(p, who + " " + name);
    for (double w : gs.ethnicity) check_probability(w, who + " ethnicity weight");
    for (const auto& [name, v] : gs.wage_slopes) {
      const auto& known = wage_covariates();
      if (std::find(known.begin(), known.end(), name) == known.end())
        throw Error(ErrorCode::kInvalidSpec, fmt::format("unknown wage covariate '{}'", name));
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidSpec, fmt::format("wage slope '{}' is not finite", name));
    }
  }
  for (const auto& [name, v] : spec.sector_selection) {
    if (std::find(kSelectionFeatures.begin(), kSelectionFeatures.end(), name) == kSelectionFeatures.end())
      throw Error(ErrorCode::kInvalidSpec, fmt::format("unknown selection covariate '{}'", name));
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidSpec, fmt::format("selection weight '{}' is not finite", name));
  }
}

Synthetic generate(const DgpSpec& spec) {
  validate_spec(spec);
  const std::size_t J = spec.sectors.size();
  const std::size_t T = spec.n_periods;
  const long n = static_cast<long>(spec.n_workers);

  // sector sizes blend the male and female employment profiles
  double sum_m = 0, sum_f = 0;
  for (const auto& s : spec.sectors) {
    sum_m += s.size_male;
    sum_f += s.size_female;
  }
  std::vector<double> pi(J), f_pooled(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto& s = spec.sectors[j];
    pi[j] = (1.0 - spec.sector_mix) * (sum_m > 0 ? s.size_male / sum_m : 0.0) +
            spec.sector_mix * (sum_f > 0 ? s.size_female / sum_f : 0.0);
    f_pooled[j] = std::accumulate(s.female_share.begin(), s.female_share.end(), 0.0) / static_cast<double>(T);
  }

  // deterministic head counts: count[t][j][g]
  const auto N = apportion(n, pi);
  std::vector<std::vector<std::array<long, 2>>> count(T, std::vector<std::array<long, 2>>(J));
  for (std::size_t j = 0; j < J; ++j) {
    const long Fj = std::lround(static_cast<double>(N[j]) * f_pooled[j]);
    std::vector<long> Njt(T, N[j] / static_cast<long>(T));
    for (long r = 0; r < N[j] % static_cast<long>(T); ++r) ++Njt[static_cast<std::size_t>(r)];
    std::vector<double> w(T);
    for (std::size_t t = 0; t < T; ++t) w[t] = static_cast<double>(Njt[t]) * spec.sectors[j].female_share[t];
    auto Fjt = apportion(Fj, w);
    // keep each cell within its head count, moving any excess to periods with room
    long excess = 0;
    for (std::size_t t = 0; t < T; ++t)
      if (Fjt[t] > Njt[t]) {
        excess += Fjt[t] - Njt[t];
        Fjt[t] = Njt[t];
      }
    for (std::size_t t = 0; t < T && excess > 0; ++t) {
      const long room = std::min(excess, Njt[t] - Fjt[t]);
      Fjt[t] += room;
      excess -= room;
    }
    for (std::size_t t = 0; t < T; ++t) count[t][j] = {Fjt[t], Njt[t] - Fjt[t]};
  }

  std::vector<std::string> times, codes;
  for (std::size_t t = 0; t < T; ++t) times.push_back(std::to_string(spec.first_year + static_cast<int>(t)));
  for (const auto& s : spec.sectors) codes.push_back(s.code);
  std::vector<std::vector<std::array<double, 2>>> realised(T, std::vector<std::array<double, 2>>(J));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < J; ++j)
      realised[t][j] = {static_cast<double>(count[t][j][0]), static_cast<double>(count[t][j][1])};
  SectorPanel panel(times, codes, realised);
  const DominanceMap planted = classify_dominance(panel, Pooling::kPooled);

  // workers, ordered by period then gender
  std::vector<Person> people;
  people.reserve(static_cast<std::size_t>(n) * 3 / 2);
  const std::uint64_t person_stream = stream_id("synthgen/person");
  std::array<long, 2> n_gender{0, 0};
  for (std::size_t t = 0; t < T; ++t)
    for (int g = 0; g < 2; ++g) {
      long cell = 0;
      for (std::size_t j = 0; j < J; ++j) cell += count[t][j][static_cast<std::size_t>(g)];
      n_gender[static_cast<std::size_t>(g)] += cell;
      for (long i = 0; i < cell; ++i) {
        Person p;
        p.t = static_cast<int>(t);
        p.g = g;
        CounterRng rng(spec.seed, person_stream ^ mix64(people.size()));
        draw_covariates(p, spec.gender[static_cast<std::size_t>(g)], rng, 0.0, 0.0);
        people.push_back(p);
      }
    }
  const std::size_t n_workers = people.size();

  // part-time by rank quota on kids plus noise, per gender
  std::array<double, 2> pt_share{};
  for (int g = 0; g < 2; ++g) {
    std::vector<std::pair<double, std::size_t>> latent;
    CounterRng rng(spec.seed, stream_id(fmt::format("synthgen/part_time/{}", g)));
    for (std::size_t i = 0; i < n_workers; ++i)
      if (people[i].g == g) latent.emplace_back(spec.part_time_kids_loading * people[i].kids + rng.normal(), i);
    const auto quota = static_cast<std::size_t>(
        std::lround(spec.gender[static_cast<std::size_t>(g)].part_time_share * static_cast<double>(latent.size())));
    std::stable_sort(latent.begin(), latent.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; k < quota; ++k) people[latent[k].second].pt = true;
    pt_share[static_cast<std::size_t>(g)] = static_cast<double>(quota) / static_cast<double>(latent.size());
  }

  // sector-dominance group by rank quota on a latent index, then sectors by shuffled blocks
  std::array<long, 2> fd_count{0, 0};
  {
    std::size_t begin = 0;
    for (std::size_t t = 0; t < T; ++t)
      for (int g = 0; g < 2; ++g) {
        std::size_t end = begin;
        while (end < n_workers && people[end].t == static_cast<int>(t) && people[end].g == g) ++end;
        CounterRng rng(spec.seed, stream_id(fmt::format("synthgen/sector/{}/{}", t, g)));
        std::vector<std::pair<double, std::size_t>> latent;
        for (std::size_t i = begin; i < end; ++i) {
          double index = rng.normal();
          for (const auto& [name, w] : spec.sector_selection) index += w * feature(people[i], name);
          latent.emplace_back(index, i);
        }
        std::stable_sort(latent.begin(), latent.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<std::size_t> fd_rows, md_rows;
        long k_fd = 0;
        for (std::size_t j = 0; j < J; ++j)
          if (planted.pooled[j] == Dominance::kFemale) k_fd += count[t][j][static_cast<std::size_t>(g)];
        for (std::size_t k = 0; k < latent.size(); ++k)
          (static_cast<long>(k) < k_fd ? fd_rows : md_rows).push_back(latent[k].second);
        fd_count[static_cast<std::size_t>(g)] += k_fd;
        for (auto* rows : {&fd_rows, &md_rows}) {
          std::sort(rows->begin(), rows->end());
          for (std::size_t k = rows->size(); k > 1; --k)
            std::swap((*rows)[k - 1], (*rows)[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(k) - 1))]);
          const Dominance group = rows == &fd_rows ? Dominance::kFemale : Dominance::kMale;
          std::size_t pos = 0;
          for (std::size_t j = 0; j < J; ++j) {
            if (planted.pooled[j] != group) continue;
            for (long c = 0; c < count[t][j][static_cast<std::size_t>(g)]; ++c) {
              Person& p = people[(*rows)[pos++]];
              p.sector = static_cast<int>(j);
              p.fd = group == Dominance::kFemale;
            }
          }
        }
        begin = end;
      }
  }

  // occupation within sector
  for (std::size_t i = 0; i < n_workers; ++i) {
    Person& p = people[i];
    CounterRng rng(spec.seed, stream_id("synthgen/occupation") ^ mix64(i));
    const auto& s = spec.sectors[static_cast<std::size_t>(p.sector)];
    p.occupation = static_cast<int>(rng.categorical(p.g == kFemale ? s.occupation_female : s.occupation_male));
  }

  // hours: antithetic pairs within gender and part-time status keep the means exact
  for (int g = 0; g < 2; ++g)
    for (bool pt : {false, true}) {
      const auto& gs = spec.gender[static_cast<std::size_t>(g)];
      const double mean = pt ? gs.part_time_hours : gs.full_time_hours;
      const double sd = pt ? gs.part_time_hours_sd : gs.full_time_hours_sd;
      const double cap = std::min(2.0 * sd, mean * 0.9);
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n_workers; ++i)
        if (people[i].g == g && people[i].pt == pt) rows.push_back(i);
      for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
        CounterRng rng(spec.seed, stream_id("synthgen/hours") ^ mix64(rows[k]));
        const double e = std::clamp(sd * rng.normal(), -cap, cap);
        people[rows[k]].hours = mean + e;
        people[rows[k + 1]].hours = mean - e;
      }
      if (rows.size() % 2) people[rows.back()].hours = mean;
    }

  // wages
  GroundTruth truth;
  truth.names.push_back("(Intercept)");
  for (const auto& c : wage_covariates()) truth.names.push_back(c);
  truth.names.push_back("fd");
  const std::size_t K = truth.names.size();
  for (int g = 0; g < 2; ++g) {
    const auto& gs = spec.gender[static_cast<std::size_t>(g)];
    const double fd_share = static_cast<double>(fd_count[static_cast<std::size_t>(g)]) /
                            static_cast<double>(n_gender[static_cast<std::size_t>(g)]);
    const Eigen::VectorXd m = covariate_means(gs, pt_share[static_cast<std::size_t>(g)]);
    Eigen::VectorXd b(K), mx(K);
    mx(0) = 1.0;
    mx.segment(1, 13) = m;
    mx(static_cast<Eigen::Index>(K - 1)) = fd_share;
    for (std::size_t c = 0; c < wage_covariates().size(); ++c)
      b(static_cast<Eigen::Index>(c + 1)) = slope(gs.wage_slopes, wage_covariates()[c]);
    b(static_cast<Eigen::Index>(K - 1)) = spec.tau;
    b(0) = 0.0;
    b(0) = gs.mean_log_wage - mx.dot(b);
    truth.beta[static_cast<std::size_t>(g)] = b;
    truth.mean_x[static_cast<std::size_t>(g)] = mx;
  }
  for (std::size_t i = 0; i < n_workers; ++i) {
    Person& p = people[i];
    const auto& gs = spec.gender[static_cast<std::size_t>(p.g)];
    const Eigen::VectorXd& b = truth.beta[static_cast<std::size_t>(p.g)];
    double lw = b(0) + spec.tau * p.fd;
    for (std::size_t c = 0; c < wage_covariates().size(); ++c)
      lw += b(static_cast<Eigen::Index>(c + 1)) * feature(p, wage_covariates()[c]);
    double sigma = gs.sigma;
    if (spec.heteroskedastic) sigma *= 0.5 + (p.yrseduc - 10.0) / kEducTrials;
    CounterRng rng(spec.seed, stream_id("synthgen/wage") ^ mix64(i));
    p.ln_wage = lw + sigma * rng.normal();
  }

  // persons outside the labour force
  for (int g = 0; g < 2; ++g) {
    const auto& gs = spec.gender[static_cast<std::size_t>(g)];
    const long inactive = std::lround(static_cast<double>(n_gender[static_cast<std::size_t>(g)]) *
                                      (1.0 - gs.participation) / gs.participation);
    for (long i = 0; i < inactive; ++i) {
      Person p;
      p.t = static_cast<int>(static_cast<std::size_t>(i) % T);
      p.g = g;
      p.inlf = false;
      CounterRng rng(spec.seed, person_stream ^ mix64(people.size()));
      draw_covariates(p, gs, rng, spec.inactive_kids_shift, spec.inactive_benefit_shift);
      people.push_back(p);
    }
  }

  // frame
  const std::size_t rows = people.size();
  std::vector<double> id(rows), year(rows), age(rows), educ(rows), exper(rows), cpi(rows);
  std::vector<std::optional<bool>> female(rows), incouple(rows), kids(rows), training(rows), pub(rows), benefit(rows),
      inlf(rows), fd(rows), lowseg(rows), parttime(rows);
  std::vector<std::optional<double>> hours(rows), hourpay(rows), ln_wage(rows);
  std::vector<std::int32_t> nationality(rows), ethnicity(rows), sector(rows), occupation(rows);
  std::vector<bool> high(J, false);
  for (std::size_t j = 0; j < J; ++j)
    high[j] = std::find(spec.high_segregation.begin(), spec.high_segregation.end(), spec.sectors[j].code) !=
              spec.high_segregation.end();
  for (std::size_t i = 0; i < rows; ++i) {
    const Person& p = people[i];
    const int yr = spec.first_year + p.t;
    id[i] = static_cast<double>(i + 1);
    year[i] = yr;
    cpi[i] = 100.0 * std::pow(1.0 + spec.cpi_growth, yr - spec.cpi_base_year);
    female[i] = p.g == kFemale;
    age[i] = p.age;
    educ[i] = p.yrseduc;
    exper[i] = p.experience;
    incouple[i] = p.incouple;
    kids[i] = p.kids;
    training[i] = p.training;
    pub[i] = p.pub;
    benefit[i] = p.benefit;
    inlf[i] = p.inlf;
    nationality[i] = p.nationality;
    ethnicity[i] = p.ethnicity;
    sector[i] = p.inlf ? p.sector : -1;
    occupation[i] = p.inlf ? p.occupation : -1;
    if (p.inlf) {
      fd[i] = p.fd;
      lowseg[i] = !high[static_cast<std::size_t>(p.sector)];
      parttime[i] = p.pt;
      hours[i] = p.hours;
      ln_wage[i] = p.ln_wage;
      hourpay[i] = std::exp(p.ln_wage) * cpi[i] / 100.0;
    }
  }
  std::vector<std::string> occ_levels;
  for (int k = 1; k <= 9; ++k) occ_levels.push_back(std::to_string(k));
  Frame frame({Column::numeric("id", std::move(id)),
               Column::numeric("year", std::move(year)),
               Column::boolean("female", female),
               Column::numeric("age", std::move(age)),
               Column::numeric("yrseduc", std::move(educ)),
               Column::numeric("experience", std::move(exper)),
               Column::boolean("incouple", incouple),
               Column::boolean("kids", kids),
               Column::boolean("training", training),
               Column::boolean("public", pub),
               Column::boolean("benefit", benefit),
               Column::categorical_codes("nationality", std::move(nationality), {"UK", "EEA", "nonEEA"}),
               Column::categorical_codes("ethnicity", std::move(ethnicity), {"white", "black", "asian", "other"}),
               Column::boolean("inlf", inlf),
               Column::categorical_codes("sector", std::move(sector), codes),
               Column::categorical_codes("occupation", std::move(occupation), occ_levels),
               Column::boolean("fd", fd),
               Column::boolean("lowseg", lowseg),
               Column::boolean("parttime", parttime),
               Column::numeric("hours", hours),
               Column::numeric("cpi", std::move(cpi)),
               Column::numeric("hourpay", hourpay),
               Column::numeric("ln_wage", ln_wage)});

  // population-level truth from the real-valued mix
  std::vector<std::vector<std::array<double, 2>>> expected(T, std::vector<std::array<double, 2>>(J));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < J; ++j) {
      const double cell = static_cast<double>(n) * pi[j] / static_cast<double>(T);
      const double f = spec.sectors[j].female_share[t];
      expected[t][j] = {cell * f, cell * (1.0 - f)};
    }
  const SectorPanel population(times, codes, expected);
  const DominanceMap pop_dom = classify_dominance(population, Pooling::kPooled);
  const SsiSeries pop_ssi = ssi(population, pop_dom);
  truth.dominance = pop_dom.pooled;
  for (std::size_t j = 0; j < J; ++j) truth.degree.push_back(high[j] ? Degree::kHigh : Degree::kLow);
  for (std::size_t t = 0; t < T; ++t) truth.ssi.push_back({pop_ssi.fd(t), pop_ssi.md(t)});
  truth.att = spec.tau;
  truth.ate = spec.tau;
  double females = 0;
  for (std::size_t j = 0; j < J; ++j) {
    double fj = 0, nj = 0;
    for (std::size_t t = 0; t < T; ++t) {
      fj += realised[t][j][0];
      nj += realised[t][j][0] + realised[t][j][1];
    }
    truth.female_share.push_back(fj / nj);
    females += fj;
  }
  truth.overall_female_share = females / static_cast<double>(n);

  const Eigen::VectorXd& ba = truth.beta[kMale];
  const Eigen::VectorXd& bb = truth.beta[kFemale];
  const Eigen::VectorXd d = truth.mean_x[kMale] - truth.mean_x[kFemale];
  truth.kbo.overall = spec.gender[kMale].mean_log_wage - spec.gender[kFemale].mean_log_wage;
  truth.kbo.endowment = d.dot(bb);
  truth.kbo.coefficient = truth.mean_x[kFemale].dot(ba - bb);
  truth.kbo.interaction = d.dot(ba - bb);

  return {std::move(frame), std::move(panel), std::move(truth)};
}

DgpSpec calibrate_to_paper() {
  struct Row {
    const char* code;
    const char* name;
    std::array<double, 5> female;  // 2005, 2010, 2015, 2020, pooled (%)
    std::array<double, 9> occ_m;
    double total_m;
    std::array<double, 9> occ_f;
    double total_f;
  };
  static const Row rows[] = {
      {"A", "Agriculture, forestry & fishing", {30.8, 25.4, 32.7, 31.9, 29.9},
       {0.05, 0.03, 0.01, 0.02, 0.26, 0.01, 0.02, 0.12, 0.48}, 1.01,
       {0.03, 0.01, 0.03, 0.08, 0.05, 0.08, 0.02, 0.04, 0.15}, 0.48},
      {"B", "Mining & quarrying", {15.3, 13.8, 15.2, 23.4, 18.0},
       {0.07, 0.11, 0.10, 0.03, 0.09, 0.00, 0.00, 0.12, 0.04}, 0.57,
       {0.00, 0.05, 0.03, 0.06, 0.01, 0.01, 0.01, 0.00, 0.01}, 0.16},
      {"C", "Manufacturing", {25.6, 24.6, 25.7, 28.8, 25.9},
       {1.29, 1.27, 1.54, 0.62, 3.12, 0.04, 0.35, 3.91, 2.26}, 14.40,
       {0.44, 0.36, 0.85, 1.57, 0.20, 0.06, 0.41, 1.02, 1.04}, 5.95},
      {"D", "Electricity, gas & air con supply", {24.6, 25.1, 27.1, 26.7, 27.6},
       {0.06, 0.10, 0.07, 0.05, 0.11, 0.00, 0.14, 0.08, 0.04}, 0.65,
       {0.02, 0.01, 0.02, 0.07, 0.01, 0.00, 0.11, 0.01, 0.01}, 0.24},
      {"E", "Water supply, sewerage & waste", {21.3, 18.8, 21.7, 23.2, 20.3},
       {0.07, 0.11, 0.08, 0.09, 0.08, 0.00, 0.06, 0.38, 0.37}, 1.25,
       {0.03, 0.02, 0.05, 0.11, 0.01, 0.01, 0.03, 0.01, 0.04}, 0.29},
      {"F", "Construction", {14.6, 16.8, 18.4, 21.1, 16.8},
       {0.79, 1.10, 0.49, 0.31, 3.39, 0.04, 0.12, 1.15, 2.06}, 9.45,
       {0.14, 0.14, 0.20, 0.91, 0.07, 0.01, 0.14, 0.01, 0.09}, 1.72},
      {"G", "Distribution", {53.4, 51.5, 51.2, 49.3, 51.7},
       {1.26, 0.38, 1.37, 0.63, 1.80, 0.05, 6.50, 1.98, 3.85}, 17.82,
       {0.80, 0.26, 0.99, 1.87, 0.22, 0.12, 12.75, 0.31, 2.28}, 19.60},
      {"H", "Transport & storage", {26.4, 23.0, 25.1, 24.8, 24.5},
       {0.29, 0.18, 0.29, 0.25, 0.20, 0.10, 0.12, 2.99, 2.33}, 6.76,
       {0.15, 0.03, 0.14, 0.55, 0.01, 0.30, 0.16, 0.16, 0.53}, 2.03},
      {"I", "Accommodation & food services", {58.6, 57.9, 56.0, 57.9, 57.5},
       {0.65, 0.02, 0.07, 0.19, 1.98, 0.11, 0.41, 0.40, 5.99}, 9.82,
       {0.35, 0.03, 0.16, 0.60, 0.64, 0.47, 0.76, 0.06, 8.72}, 11.79},
      {"J", "Information & communication", {27.8, 30.9, 29.5, 32.6, 30.4},
       {0.40, 1.74, 0.87, 0.15, 0.18, 0.00, 0.38, 0.11, 0.38}, 4.22,
       {0.21, 0.36, 0.55, 0.43, 0.02, 0.01, 0.45, 0.01, 0.09}, 2.12},
      {"K", "Financial & insurance services", {54.2, 51.0, 50.1, 48.3, 50.9},
       {0.66, 0.65, 1.03, 0.76, 0.02, 0.02, 0.51, 0.02, 0.12}, 3.79,
       {0.29, 0.31, 0.65, 1.43, 0.00, 0.01, 0.49, 0.00, 0.09}, 3.27},
      {"L", "Real estate services", {56.2, 63.2, 55.3, 58.3, 57.8},
       {0.20, 0.11, 0.29, 0.12, 0.08, 0.03, 0.15, 0.04, 0.11}, 1.13,
       {0.14, 0.07, 0.32, 0.49, 0.01, 0.04, 0.09, 0.01, 0.08}, 1.24},
      {"M", "Professional, scientific & technical activities", {49.8, 47.7, 48.2, 46.8, 48.0},
       {0.67, 2.15, 1.56, 0.87, 0.31, 0.06, 0.37, 0.22, 1.04}, 7.25,
       {0.49, 1.20, 1.43, 2.22, 0.02, 0.19, 0.32, 0.08, 0.83}, 6.77},
      {"N", "Admin & support services", {24.5, 46.9, 49.7, 48.8, 44.6},
       {0.46, 0.59, 0.80, 0.36, 0.53, 0.20, 0.57, 0.38, 1.60}, 5.49,
       {0.24, 0.26, 0.65, 0.92, 0.02, 0.36, 0.66, 0.05, 1.51}, 4.67},
      {"P", "Education", {74.3, 75.6, 74.8, 76.1, 75.3},
       {0.15, 3.01, 0.82, 0.37, 0.10, 0.76, 0.01, 0.05, 0.32}, 5.58,
       {0.18, 5.77, 0.98, 1.62, 0.07, 3.76, 0.05, 0.02, 1.76}, 14.21},
      {"Q", "Health & social work", {80.5, 80.6, 80.3, 79.1, 80.4},
       {0.40, 1.36, 0.85, 0.50, 0.21, 1.72, 0.10, 0.12, 0.37}, 5.63,
       {0.84, 3.03, 2.66, 2.53, 0.11, 8.77, 0.30, 0.03, 1.07}, 19.33},
      {"R", "Arts, entertainment & recreation", {50.0, 52.4, 51.3, 50.7, 50.3},
       {0.28, 0.12, 0.65, 0.30, 0.40, 0.48, 0.21, 0.04, 0.97}, 3.44,
       {0.11, 0.13, 0.43, 0.72, 0.07, 0.44, 0.24, 0.00, 0.79}, 2.93},
      {"S", "Other service activities", {66.1, 61.7, 61.8, 60.6, 62.4},
       {0.10, 0.26, 0.27, 0.07, 0.24, 0.26, 0.04, 0.11, 0.30}, 1.64,
       {0.10, 0.08, 0.23, 0.43, 0.01, 1.45, 0.13, 0.01, 0.36}, 2.79},
      {"T", "Households as employers", {68.6, 78.4, 79.6, 77.1, 74.8},
       {0.00, 0.00, 0.00, 0.00, 0.05, 0.04, 0.00, 0.01, 0.02}, 0.12,
       {0.00, 0.00, 0.00, 0.02, 0.01, 0.29, 0.01, 0.00, 0.09}, 0.41},
  };
  constexpr double kTargetFemaleShare = 0.513;
  constexpr int kAnchorYears[4] = {2005, 2010, 2015, 2020};

  DgpSpec spec;
  spec.first_year = 2005;
  spec.n_periods = 16;
  for (const auto& r : rows) {
    SectorSpec s;
    s.code = r.code;
    s.name = r.name;
    s.size_male = r.total_m;
    s.size_female = r.total_f;
    s.occupation_male = r.occ_m;
    s.occupation_female = r.occ_f;
    // anchors interpolated linearly, then shifted so the period mean is the pooled share
    double mean = 0.0;
    for (std::size_t t = 0; t < spec.n_periods; ++t) {
      const int yr = spec.first_year + static_cast<int>(t);
      std::size_t a = 0;
      while (a + 2 < 4 && yr > kAnchorYears[a + 1]) ++a;
      const double w = static_cast<double>(yr - kAnchorYears[a]) / (kAnchorYears[a + 1] - kAnchorYears[a]);
      const double v = ((1.0 - w) * r.female[a] + w * r.female[a + 1]) / 100.0;
      s.female_share.push_back(v);
      mean += v;
    }
    mean /= static_cast<double>(spec.n_periods);
    for (double& v : s.female_share) v = std::clamp(v + r.female[4] / 100.0 - mean, 0.001, 0.999);
    spec.sectors.push_back(std::move(s));
  }

  // blend weight that puts the overall female share at the target
  double sum_m = 0, sum_f = 0, a = 0, b = 0;
  for (const auto& r : rows) {
    sum_m += r.total_m;
    sum_f += r.total_f;
  }
  for (const auto& r : rows) {
    a += r.total_m / sum_m * r.female[4] / 100.0;
    b += r.total_f / sum_f * r.female[4] / 100.0;
  }
  spec.sector_mix = (kTargetFemaleShare - a) / (b - a);
  spec.high_segregation = {"I", "P", "Q", "S", "C", "F", "H", "J", "M"};

  const std::vector<std::pair<std::string, double>> slopes{
      {"age", 0.007},       {"age^2", -0.00005}, {"yrseduc", 0.158},  {"yrseduc^2", -0.005},
      {"experience", 0.015}, {"experience^2", -0.0002}, {"incouple", 0.064}, {"kids", 0.041},
      {"training", 0.068},  {"parttime", -0.097}, {"public", 0.032},  {"nationality[EEA]", -0.056},
      {"nationality[nonEEA]", -0.032}};

  GenderSpec& f = spec.gender[kFemale];
  f.mean_log_wage = 2.41;
  f.sigma = 0.42;
  f.part_time_share = 0.43;
  f.part_time_hours = 18.0;
  f.full_time_hours = (30.89 - 0.43 * 18.0) / 0.57;
  f.participation = 0.70;
  f.p_incouple = 0.51;
  f.p_kids = 0.37;
  f.p_training = 0.33;
  f.p_public = 0.33;
  f.p_benefit = 0.46;
  f.p_eea = 0.05;
  f.p_non_eea = 0.10;
  f.p_educ = (13.21 - 10.0) / kEducTrials;
  f.ethnicity = {0.88, 0.03, 0.05, 0.04};
  f.wage_slopes = slopes;

  GenderSpec& m = spec.gender[kMale];
  m.mean_log_wage = 2.59;
  m.sigma = 0.47;
  m.part_time_share = 0.12;
  m.part_time_hours = 18.0;
  m.full_time_hours = (40.33 - 0.12 * 18.0) / 0.88;
  m.participation = 0.79;
  m.p_incouple = 0.50;
  m.p_kids = 0.28;
  m.p_training = 0.32;
  m.p_public = 0.13;
  m.p_benefit = 0.20;
  m.p_eea = 0.04;
  m.p_non_eea = 0.09;
  m.p_educ = (13.11 - 10.0) / kEducTrials;
  m.ethnicity = {0.90, 0.02, 0.05, 0.03};
  m.wage_slopes = slopes;

  spec.tau = -0.094;
  spec.sector_selection = {{"yrseduc", 0.05}, {"kids", 0.2}, {"parttime", 0.5}, {"public", 0.6}, {"training", 0.1}};
  return spec;
}

KboSim simulate_kbo(const KboSimSpec& spec) {
  if (spec.k < 1 || spec.n_a <= static_cast<std::size_t>(spec.k) + 1 || spec.n_b <= static_cast<std::size_t>(spec.k) + 1)
    throw Error(ErrorCode::kInvalidSpec, "simulate_kbo needs k >= 1 and more rows than columns");
  check_positive(spec.sigma, "sigma");
  static const double kSlopes[] = {0.5, -0.3, 0.2, 0.1, 0.4, -0.2, 0.3, -0.1};
  const int k = spec.k;
  Eigen::VectorXd beta_b(k + 1);
  beta_b(0) = 1.0;
  for (int j = 0; j < k; ++j) beta_b(j + 1) = kSlopes[j % 8];
  Eigen::VectorXd beta_a = beta_b;
  beta_a(0) += spec.intercept_shift;

  auto draw = [&](std::size_t n, double shift, const Eigen::VectorXd& beta, std::string_view name,
                  Eigen::VectorXd& y, DesignMatrix& d) {
    CounterRng rng(spec.seed, stream_id(name));
    d.X.resize(static_cast<Eigen::Index>(n), k + 1);
    y.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
      d.X(i, 0) = 1.0;
      for (int j = 0; j < k; ++j) d.X(i, j + 1) = shift + rng.normal();
      y(i) = d.X.row(i).dot(beta) + spec.sigma * rng.normal();
    }
    d.has_intercept = true;
    d.column_names = {"(Intercept)"};
    d.roles = {ColumnRole::kIntercept};
    for (int j = 0; j < k; ++j) {
      d.column_names.push_back(fmt::format("x{}", j + 1));
      d.roles.push_back(ColumnRole::kContinuous);
    }
  };
  KboSim out;
  draw(spec.n_a, spec.mean_shift, beta_a, "simulate_kbo/a", out.y_a, out.X_a);
  draw(spec.n_b, 0.0, beta_b, "simulate_kbo/b", out.y_b, out.X_b);
  out.truth.endowment = spec.mean_shift * beta_b.tail(k).sum();
  out.truth.coefficient = spec.intercept_shift;
  out.truth.interaction = 0.0;
  out.truth.overall = out.truth.endowment + out.truth.coefficient;
  return out;
}

TreatmentSim simulate_treatment(const TreatmentSimSpec& spec) {
  if (spec.k < 1 || spec.n < 10) throw Error(ErrorCode::kInvalidSpec, "simulate_treatment needs k >= 1 and n >= 10");
  check_positive(spec.sigma, "sigma");
  static const double kSelect[] = {0.5, 0.4, -0.3, 0.2, -0.2, 0.1};
  static const double kOutcome[] = {1.0, 0.5, 0.5, -0.4, 0.3, 0.2};
  const int k = spec.k;
  const auto n = spec.n;
  CounterRng rng(spec.seed, stream_id("simulate_treatment"));
  std::vector<std::vector<double>> x(static_cast<std::size_t>(k), std::vector<double>(n));
  std::vector<double> y(n);
  std::vector<std::optional<bool>> d(n);
  TreatmentSim out;
  out.true_score.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double index = spec.selection_intercept, mean = 1.0;
    for (int j = 0; j < k; ++j) {
      const double v = rng.normal();
      x[static_cast<std::size_t>(j)][i] = v;
      index += kSelect[j % 6] * v;
      mean += kOutcome[j % 6] * v;
    }
    const bool treated = index + rng.normal() > 0.0;
    d[i] = treated;
    out.true_score(static_cast<Eigen::Index>(i)) = 0.5 * std::erfc(-index / std::sqrt(2.0));
    y[i] = mean + spec.tau * treated + spec.sigma * rng.normal();
  }
  std::vector<Column> cols{Column::boolean("d", d), Column::numeric("y", std::move(y))};
  out.pscore_formula = "d ~ ";
  for (int j = 0; j < k; ++j) {
    cols.push_back(Column::numeric(fmt::format("x{}", j + 1), std::move(x[static_cast<std::size_t>(j)])));
    out.pscore_formula += fmt::format("{}x{}", j ? " + " : "", j + 1);
  }
  out.frame = Frame(std::move(cols));
  return out;
}

}  // namespace segkit
