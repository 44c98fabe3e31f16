#include "robustgp/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>

#include "robustgp/optim.hpp"

namespace robustgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kVarFloor = 1e-12;
constexpr double kVarCeil = 1e12;
}  // namespace

VectorXd MixtureState::noise_diagonal(Index n) const {
  VectorXd diag(n);
  for (Index i : inliers) diag(i) = sigma_g2;
  for (std::size_t j = 0; j < outliers.size(); ++j) diag(outliers[j]) = sigma_l2(j);
  return diag;
}

MixtureState init_chain(const Dataset& D, const HuberConfig& cfg, const VectorXd& w,
                        std::uint64_t seed) {
  cfg.validate();
  const Index n = D.n();
  if (D.y.size() != n || w.size() != n) throw ConfigError("init_chain: length mismatch");

  MixtureState st;
  const double s0 = robust_scale(D.y, D.dim()).s;
  st.sigma_g2 = s0 * s0;

  for (Index i = 0; i < n; ++i) {
    const double r_s = D.y(i) / (w(i) * s0);
    if (std::abs(r_s) <= cfg.b)
      st.inliers.push_back(i);
    else
      st.outliers.push_back(i);
  }
  st.sigma_l2.resize(static_cast<Index>(st.outliers.size()));
  for (std::size_t j = 0; j < st.outliers.size(); ++j) {
    const double r = D.y(st.outliers[j]);
    st.sigma_l2(j) = std::max(r * r, 1e-8);
  }
  st.beta_l = st.outliers.empty() ? 1.0 : 1.0 / st.sigma_l2.mean();

  // Kernel start: robust spreads of response and inputs, log-normal jitter
  // from the stream seed so parallel chains start overdispersed.
  RandomStream rng(seed);
  st.params.amplitude = std::max(1.4826 * mad(D.y), 1e-3) * std::exp(0.5 * rng.normal());
  st.params.length_scales.resize(D.dim());
  for (Index k = 0; k < D.dim(); ++k) {
    st.params.length_scales(k) =
        std::max(1.4826 * mad(D.X.col(k)), 1e-3) * std::exp(0.5 * rng.normal());
  }
  return st;
}

namespace {

double collapsed_gaussian(const MatrixXd& K, const VectorXd& noise_diag, const VectorXd& y,
                          double hint) {
  MatrixXd F = K;
  F.diagonal() += noise_diag;
  const SpdFactor fac(F, hint);
  return -0.5 * y.dot(fac.solve(y)) - 0.5 * fac.log_det() -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

bool in_box(double v, const ChainSettings& s) { return v >= s.prior_lo && v <= s.prior_hi; }

double log_target_given_gram(const MixtureState& st, const MatrixXd& K, const Dataset& D,
                             const HuberConfig& cfg, const ChainSettings& settings) {
  if (!in_box(st.sigma_g2, settings) || !in_box(st.beta_l, settings)) return kNegInf;
  if (!in_box(st.params.amplitude, settings)) return kNegInf;
  for (Index k = 0; k < st.params.dim(); ++k)
    if (!in_box(st.params.length_scales(k), settings)) return kNegInf;
  for (Index j = 0; j < st.sigma_l2.size(); ++j)
    if (st.sigma_l2(j) < kVarFloor || st.sigma_l2(j) > kVarCeil) return kNegInf;

  const auto consts = log_mixture_constants(cfg);
  double lp = static_cast<double>(st.inliers.size()) * consts.log_c1 +
              static_cast<double>(st.outliers.size()) * consts.log_c2;
  for (Index j = 0; j < st.sigma_l2.size(); ++j) {
    lp += std::log(st.beta_l) - st.beta_l * st.sigma_l2(j) + std::log(st.sigma_l2(j));
  }

  const double tau2 = st.params.amplitude * st.params.amplitude;
  try {
    lp += collapsed_gaussian(K, st.noise_diagonal(D.n()), D.y, tau2 + st.sigma_g2);
  } catch (const NumericalError&) {
    return kNegInf;
  }
  return lp;
}

MatrixXd gram_for(const MixtureState& st, const Dataset& D) {
  // No baked jitter: the noise diagonal conditions K + Sigma, and the
  // factorization falls back to escalation if it ever fails.
  return build_gram(D.X, st.params, 0.0).K;
}

}  // namespace

double mcmc_log_target(const MixtureState& st, const Dataset& D, const HuberConfig& cfg,
                       const ChainSettings& settings) {
  return log_target_given_gram(st, gram_for(st, D), D, cfg, settings);
}

StepAdaptation::StepAdaptation(Index n_classes, double init_step)
    : mu(n_classes, std::log(init_step)),
      hbar(n_classes, 0.0),
      logbar(n_classes, std::log(init_step)),
      step(n_classes, init_step),
      t(n_classes, 0),
      accepts(n_classes, 0),
      proposals(n_classes, 0) {}

void StepAdaptation::update(Index cls, double accept_prob) {
  constexpr double target = 0.44, gamma = 0.05, t0 = 10.0, kappa = 0.75;
  int& tc = t[cls];
  ++tc;
  hbar[cls] += ((target - accept_prob) - hbar[cls]) / (tc + t0);
  const double logs = mu[cls] - std::sqrt(static_cast<double>(tc)) / gamma * hbar[cls];
  const double eta = std::pow(static_cast<double>(tc), -kappa);
  logbar[cls] = eta * logs + (1.0 - eta) * logbar[cls];
  step[cls] = std::exp(std::clamp(logs, -10.0, 5.0));
}

void StepAdaptation::freeze() {
  for (std::size_t c = 0; c < step.size(); ++c)
    step[c] = std::exp(std::clamp(logbar[c], -10.0, 5.0));
}

void sample_hyperparams(MixtureState& st, const Dataset& D, const HuberConfig& cfg,
                        const ChainSettings& settings, RandomStream& rng,
                        StepAdaptation& adapt, bool adapting) {
  const Index d = st.params.dim();
  MatrixXd K = gram_for(st, D);
  double current = log_target_given_gram(st, K, D, cfg, settings);

  // One scalar Metropolis move in log space; cls indexes the step-size class.
  auto move = [&](Index cls, double& value, bool rebuild_gram) {
    const double proposal = value * std::exp(adapt.step[cls] * rng.normal());
    const double saved = value;
    value = proposal;
    MatrixXd K_prop;
    if (rebuild_gram) K_prop = gram_for(st, D);
    const double cand =
        log_target_given_gram(st, rebuild_gram ? K_prop : K, D, cfg, settings);

    const double delta = cand - current;
    const double accept_prob =
        std::isfinite(delta) ? std::min(1.0, std::exp(std::min(delta, 0.0)))
                             : (cand > current ? 1.0 : 0.0);
    const bool accept = std::log(std::max(rng.uniform(), 1e-300)) < delta;
    if (accept) {
      current = cand;
      if (rebuild_gram) K = std::move(K_prop);
    } else {
      value = saved;
    }
    if (adapting) adapt.update(cls, accept_prob);
    else {
      ++adapt.proposals[cls];
      if (accept) ++adapt.accepts[cls];
    }
  };

  move(0, st.sigma_g2, false);
  for (Index j = 0; j < st.sigma_l2.size(); ++j) move(1, st.sigma_l2(j), false);
  move(2, st.beta_l, false);
  if (!settings.fixed_kernel) {
    move(3, st.params.amplitude, true);
    for (Index k = 0; k < d; ++k) move(4 + k, st.params.length_scales(k), true);
  }
  ++st.iteration;
}

LatentConditional latent_conditional(const MixtureState& st, const Dataset& D) {
  const MatrixXd K = gram_for(st, D);
  const double tau2 = st.params.amplitude * st.params.amplitude;
  MatrixXd F = K;
  F.diagonal() += st.noise_diagonal(D.n());
  const SpdFactor fac(F, tau2 + st.sigma_g2);

  LatentConditional lc;
  lc.mean = K * fac.solve(D.y);
  MatrixXd cov = K - K * fac.solve(K);
  cov = ((cov + cov.transpose()) * 0.5).eval();
  lc.var = cov.diagonal().cwiseMax(0.0);
  lc.cov_factor = SpdFactor(cov, tau2).llt().matrixL();
  return lc;
}

namespace {

struct SingleChain {
  MatrixXd samples, noise, lmean, lvar;
  std::vector<long> accepts, proposals;
};

SingleChain run_single_chain(const Dataset& Dc, const HuberConfig& cfg, const VectorXd& w,
                             const ChainSettings& settings, std::uint64_t chain_seed,
                             Index retained) {
  const Index n = Dc.n();
  const Index d = Dc.dim();
  const Index n_coords = 3 + d;

  RandomStream rng(chain_seed);
  MixtureState st = init_chain(Dc, cfg, w, chain_seed);
  if (settings.fixed_kernel) st.params = *settings.fixed_kernel;

  StepAdaptation adapt(4 + d);

  SingleChain out;
  out.samples.resize(retained, n_coords);
  out.noise.resize(retained, n);
  out.lmean.resize(retained, n);
  out.lvar.resize(retained, n);

  Index rec = 0;
  for (int sweep = 1; sweep <= settings.total; ++sweep) {
    if (sweep == settings.burn_in + 1) adapt.freeze();
    sample_hyperparams(st, Dc, cfg, settings, rng, adapt, sweep <= settings.burn_in);

    // Latent conditional mean under the post-sweep state; used for the
    // split refresh and recorded on retained sweeps.
    const MatrixXd K = gram_for(st, Dc);
    MatrixXd F = K;
    F.diagonal() += st.noise_diagonal(n);
    const double tau2 = st.params.amplitude * st.params.amplitude;
    const SpdFactor fac(F, tau2 + st.sigma_g2);
    const VectorXd mean = K * fac.solve(Dc.y);

    const bool record = sweep > settings.burn_in &&
                        (sweep - settings.burn_in) % settings.thin == 0 && rec < retained;
    if (record) {
      out.samples(rec, 0) = st.sigma_g2;
      out.samples(rec, 1) = st.beta_l;
      out.samples(rec, 2) = st.params.amplitude;
      out.samples.row(rec).segment(3, d) = st.params.length_scales.transpose();
      out.noise.row(rec) = st.noise_diagonal(n).transpose();
      out.lmean.row(rec) = mean.transpose();
      const MatrixXd S = fac.solve(K);
      out.lvar.row(rec) =
          (K.diagonal() - K.cwiseProduct(S).colwise().sum().transpose())
              .cwiseMax(0.0)
              .transpose();
      ++rec;
    }

    // Split refresh: a point moving across b changes which variance
    // structure governs it. New outliers start at their squared residual.
    const double sigma_g = std::sqrt(st.sigma_g2);
    MixtureState next = st;
    next.inliers.clear();
    next.outliers.clear();
    std::vector<double> new_var;
    for (Index i = 0; i < n; ++i) {
      const double r = Dc.y(i) - mean(i);
      if (std::abs(r / (w(i) * sigma_g)) <= cfg.b) {
        next.inliers.push_back(i);
      } else {
        next.outliers.push_back(i);
        const auto it = std::find(st.outliers.begin(), st.outliers.end(), i);
        new_var.push_back(it == st.outliers.end()
                              ? std::max(r * r, 1e-8)
                              : st.sigma_l2(it - st.outliers.begin()));
      }
    }
    next.sigma_l2.resize(static_cast<Index>(new_var.size()));
    for (std::size_t j = 0; j < new_var.size(); ++j) next.sigma_l2(j) = new_var[j];
    st = std::move(next);
  }

  out.accepts = adapt.accepts;
  out.proposals = adapt.proposals;
  return out;
}

}  // namespace

ChainOutput run_chain(const Dataset& D, const HuberConfig& cfg,
                      const RobustWeighting& weighting, const ChainSettings& settings) {
  cfg.validate();
  if (settings.total <= settings.burn_in)
    throw ConfigError("run_chain: total must exceed burn_in");
  if (settings.thin < 1) throw ConfigError("run_chain: thin must be at least 1");
  if (settings.chains < 1) throw ConfigError("run_chain: need at least one chain");
  if (weighting.weights.size() != D.n())
    throw ConfigError("run_chain: weighting does not match the dataset");

  const Index n = D.n();
  const Index d = D.dim();
  const double center = median(D.y);
  const Dataset Dc{D.X, (D.y.array() - center).matrix()};
  const Index retained = (settings.total - settings.burn_in) / settings.thin;
  if (retained < 1) throw ConfigError("run_chain: no retained samples");

  std::vector<SingleChain> per_chain(settings.chains);
  const int pool = std::min<int>(effective_threads(0), settings.chains);
  if (pool <= 1) {
    for (int c = 0; c < settings.chains; ++c)
      per_chain[c] = run_single_chain(Dc, cfg, weighting.weights, settings,
                                      stream_seed(settings.seed, c), retained);
  } else {
    std::atomic<int> nextc{0};
    std::vector<std::future<void>> futs;
    for (int t = 0; t < pool; ++t) {
      futs.push_back(std::async(std::launch::async, [&]() {
        for (int c = nextc.fetch_add(1); c < settings.chains; c = nextc.fetch_add(1))
          per_chain[c] = run_single_chain(Dc, cfg, weighting.weights, settings,
                                          stream_seed(settings.seed, c), retained);
      }));
    }
    for (auto& f : futs) f.get();
  }

  ChainOutput out;
  out.chains = settings.chains;
  out.per_chain = static_cast<int>(retained);
  out.data = D;
  out.center = center;
  out.cfg = cfg;
  out.weights = weighting.weights;

  out.coord_names = {"sigma_g2", "beta_l", "tau"};
  for (Index k = 0; k < d; ++k) out.coord_names.push_back("s_" + std::to_string(k + 1));
  const Index n_coords = static_cast<Index>(out.coord_names.size());

  const Index total_rows = retained * settings.chains;
  out.samples.resize(total_rows, n_coords);
  out.noise_diag.resize(total_rows, n);
  out.latent_mean.resize(total_rows, n);
  out.latent_var.resize(total_rows, n);
  for (int c = 0; c < settings.chains; ++c) {
    out.samples.middleRows(c * retained, retained) = per_chain[c].samples;
    out.noise_diag.middleRows(c * retained, retained) = per_chain[c].noise;
    out.latent_mean.middleRows(c * retained, retained) = per_chain[c].lmean;
    out.latent_var.middleRows(c * retained, retained) = per_chain[c].lvar;
  }

  out.acceptance_names = {"sigma_g2", "sigma_l2", "beta_l", "tau"};
  for (Index k = 0; k < d; ++k) out.acceptance_names.push_back("s_" + std::to_string(k + 1));
  out.acceptance.resize(static_cast<Index>(out.acceptance_names.size()));
  for (Index cls = 0; cls < out.acceptance.size(); ++cls) {
    long acc = 0, prop = 0;
    for (const auto& ch : per_chain) {
      acc += ch.accepts[cls];
      prop += ch.proposals[cls];
    }
    out.acceptance(cls) = prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop)
                                   : std::numeric_limits<double>::quiet_NaN();
  }

  out.ess.resize(n_coords);
  out.split_rhat.resize(n_coords);
  for (Index k = 0; k < n_coords; ++k) {
    double ess = 0.0;
    std::vector<VectorXd> series;
    for (int c = 0; c < settings.chains; ++c) {
      VectorXd x = per_chain[c].samples.col(k);
      ess += ess_single_chain(x);
      series.push_back(std::move(x));
    }
    out.ess(k) = ess;
    out.split_rhat(k) = split_rhat_stat(series);
  }
  return out;
}

PredictiveDistribution predictive_average(const ChainOutput& chain, const MatrixXd& Xstar,
                                          bool include_noise, MatrixXd* per_sample_means) {
  const Index T = chain.samples.rows();
  if (T < 1) throw ConfigError("predictive_average: empty chain");
  if (Xstar.cols() != chain.data.dim())
    throw ConfigError("predictive_average: test input dimension mismatch");

  const Index nstar = Xstar.rows();
  const Index d = chain.data.dim();
  const VectorXd yc = (chain.data.y.array() - chain.center).matrix();

  VectorXd mean_sum = VectorXd::Zero(nstar);
  VectorXd mean_sq_sum = VectorXd::Zero(nstar);
  VectorXd var_sum = VectorXd::Zero(nstar);
  if (per_sample_means) per_sample_means->resize(T, nstar);

  for (Index t = 0; t < T; ++t) {
    KernelParams p;
    p.amplitude = chain.samples(t, 2);
    p.length_scales = chain.samples.row(t).segment(3, d).transpose();
    const double tau2 = p.amplitude * p.amplitude;

    MatrixXd F = build_gram(chain.data.X, p, 0.0).K;
    F.diagonal() += chain.noise_diag.row(t).transpose();
    const SpdFactor fac(F, tau2 + chain.samples(t, 0));

    const MatrixXd C = cross_gram(chain.data.X, Xstar, p);
    const VectorXd mu = C.transpose() * fac.solve(yc);
    const MatrixXd FC = fac.solve(C);

    VectorXd var(nstar);
    for (Index j = 0; j < nstar; ++j)
      var(j) = std::max(tau2 - C.col(j).dot(FC.col(j)), 0.0);
    if (include_noise) var.array() += chain.samples(t, 0);  // sigma_g2 at unseen points

    mean_sum += mu;
    mean_sq_sum += mu.cwiseProduct(mu);
    var_sum += var;
    if (per_sample_means) per_sample_means->row(t) = mu.transpose();
  }

  const double T_d = static_cast<double>(T);
  PredictiveDistribution out;
  out.mean = mean_sum / T_d;
  // law of total variance: mixture var = E[var] + Var[mean]
  out.var = var_sum / T_d +
            (mean_sq_sum / T_d - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
  out.mean.array() += chain.center;
  return out;
}

double ess_single_chain(const VectorXd& x) {
  const Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double m = x.mean();
  const VectorXd z = x.array() - m;
  const double c0 = z.squaredNorm() / static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);

  auto rho = [&](Index k) {
    double s = 0.0;
    for (Index i = 0; i + k < n; ++i) s += z(i) * z(i + k);
    return s / static_cast<double>(n) / c0;
  };

  double tau = 1.0;
  for (Index k = 1; k + 1 < n; k += 2) {
    const double pair = rho(k) + rho(k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n));
}

double split_rhat_stat(const std::vector<VectorXd>& chains) {
  std::vector<VectorXd> segs;
  for (const auto& c : chains) {
    const Index half = c.size() / 2;
    if (half < 2) continue;
    segs.push_back(c.head(half));
    segs.push_back(c.segment(half, half));
  }
  const Index m = static_cast<Index>(segs.size());
  if (m < 2) return 1.0;
  const Index L = segs[0].size();

  VectorXd seg_means(m), seg_vars(m);
  for (Index j = 0; j < m; ++j) {
    seg_means(j) = segs[j].mean();
    seg_vars(j) = (segs[j].array() - seg_means(j)).square().sum() /
                  static_cast<double>(L - 1);
  }
  const double w = seg_vars.mean();
  const double grand = seg_means.mean();
  const double b = static_cast<double>(L) *
                   (seg_means.array() - grand).square().sum() / static_cast<double>(m - 1);
  if (w <= 0.0) return 1.0;
  const double var_plus =
      (static_cast<double>(L - 1) / static_cast<double>(L)) * w + b / static_cast<double>(L);
  return std::sqrt(var_plus / w);
}

}  // namespace robustgp
