#include "aspus/spu.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "aspus/csv.hpp"
#include "aspus/errors.hpp"
#include "aspus/rng.hpp"
#include "aspus/threads.hpp"

namespace aspus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_gammas(const std::vector<double>& gammas, const char* what,
                  bool allow_inf) {
  if (gammas.empty()) {
    throw ConfigError(std::string(what) + " exponent list is empty");
  }
  double prev = 0.0;
  for (double g : gammas) {
    if (std::isnan(g) || g < 1.0) {
      throw ConfigError(std::string(what) + " exponents must be >= 1");
    }
    if (std::isinf(g) && !allow_inf) {
      throw ConfigError(std::string(what) +
                        " exponents must be finite for pathway tests");
    }
    if (g <= prev) {
      throw ConfigError(std::string(what) +
                        " exponents must be strictly increasing");
    }
    prev = g;
  }
}

std::string gamma_label(double g) {
  if (std::isinf(g)) return "inf";
  if (g == std::floor(g) && std::abs(g) < 1e15) {
    return std::to_string(static_cast<long long>(g));
  }
  return csv::format_real(g);
}

// |x|^gamma for the grid's common exponents without a pow call.
double powered(double x, double gamma) {
  if (gamma == 1.0) return x;
  const double x2 = x * x;
  if (gamma == 2.0) return x2;
  const double x4 = x2 * x2;
  if (gamma == 4.0) return x4;
  if (gamma == 8.0) return x4 * x4;
  return std::pow(x, gamma);
}

// (sum of w_j^gamma)^(1/gamma) over a contiguous slice, rescaled by the slice
// maximum so large exponents stay inside double range.
double powered_norm(const double* w, Index count, double gamma) {
  double top = 0.0;
  for (Index j = 0; j < count; ++j) top = std::max(top, w[j]);
  if (top == 0.0) return 0.0;
  if (std::isinf(gamma)) return top;
  double sum = 0.0;
  for (Index j = 0; j < count; ++j) sum += powered(w[j] / top, gamma);
  return top * std::pow(sum, 1.0 / gamma);
}

}  // namespace

GammaGrid GammaGrid::gene_defaults() {
  return {{1.0, 2.0, 4.0, 8.0, kInf}, {}};
}

GammaGrid GammaGrid::pathway_defaults() {
  return {{1.0, 2.0, 4.0, 8.0}, {1.0, 2.0, 4.0, 8.0}};
}

void GammaGrid::validate(bool for_pathway) const {
  if (for_pathway) {
    check_gammas(snp_gammas, "SNP", false);
    check_gammas(gene_gammas, "gene", false);
  } else {
    check_gammas(snp_gammas, "SNP", true);
  }
}

Index GammaGrid::combo_count(bool for_pathway) const {
  const Index s = static_cast<Index>(snp_gammas.size());
  return for_pathway ? s * static_cast<Index>(gene_gammas.size()) : s;
}

std::vector<std::string> combo_labels(const GammaGrid& grid,
                                      bool for_pathway) {
  std::vector<std::string> out;
  for (double g : grid.snp_gammas) {
    if (!for_pathway) {
      out.push_back(gamma_label(g));
      continue;
    }
    for (double gg : grid.gene_gammas) {
      out.push_back(gamma_label(g) + "_" + gamma_label(gg));
    }
  }
  return out;
}

void PermPlan::validate() const {
  if (b_init < 1 || b_init > b_total) {
    throw ConfigError("initial batch must satisfy 1 <= B' <= B");
  }
  if (!(theta > 0.0) || theta > 1.0) {
    throw ConfigError("theta must lie in (0, 1]");
  }
}

void TestUnit::validate() const {
  if (id.empty()) throw ConfigError("test unit has an empty id");
  if (cols.empty()) {
    throw ConfigError("test unit '" + id + "' has no SNP columns");
  }
  if (snp_weights.size() != static_cast<Index>(cols.size())) {
    throw ConfigError("test unit '" + id +
                      "': SNP weights do not align with columns");
  }
  for (Index j = 0; j < snp_weights.size(); ++j) {
    if (!(snp_weights[j] > 0.0) || !std::isfinite(snp_weights[j])) {
      throw ConfigError("test unit '" + id + "': SNP weights must be positive");
    }
  }
  if (!pathway) return;
  Index total = 0;
  for (Index k : gene_sizes) {
    if (k < 1) throw ConfigError("test unit '" + id + "': empty gene");
    total += k;
  }
  if (total != static_cast<Index>(cols.size())) {
    throw ConfigError("test unit '" + id +
                      "': gene sizes do not sum to the column count");
  }
  if (gene_weights.size() != static_cast<Index>(gene_sizes.size())) {
    throw ConfigError("test unit '" + id +
                      "': gene weights do not align with gene sizes");
  }
  for (Index g = 0; g < gene_weights.size(); ++g) {
    if (!(gene_weights[g] > 0.0) || !std::isfinite(gene_weights[g])) {
      throw ConfigError("test unit '" + id +
                        "': gene weights must be positive");
    }
  }
}

TestUnit make_gene_unit(const GeneMap& genemap, Index gene) {
  if (gene < 0 || gene >= genemap.size()) {
    throw ConfigError("gene index out of range");
  }
  const GeneMap::Gene& g = genemap.genes[static_cast<std::size_t>(gene)];
  TestUnit unit;
  unit.id = g.id;
  unit.cols = g.cols;
  unit.snp_weights = g.weights;
  unit.validate();
  return unit;
}

TestUnit make_pathway_unit(const GeneMap& genemap, const PathwayMap& pathways,
                           Index pathway) {
  if (pathway < 0 || pathway >= pathways.size()) {
    throw ConfigError("pathway index out of range");
  }
  const PathwayMap::Pathway& pw =
      pathways.pathways[static_cast<std::size_t>(pathway)];
  TestUnit unit;
  unit.id = pw.id;
  unit.pathway = true;
  std::vector<double> v;
  std::vector<double> q;
  for (std::size_t g = 0; g < pw.gene_idx.size(); ++g) {
    const GeneMap::Gene& gene =
        genemap.genes[static_cast<std::size_t>(pw.gene_idx[g])];
    unit.cols.insert(unit.cols.end(), gene.cols.begin(), gene.cols.end());
    for (Index j = 0; j < gene.weights.size(); ++j) {
      v.push_back(gene.weights[j]);
    }
    unit.gene_sizes.push_back(static_cast<Index>(gene.cols.size()));
    q.push_back(pw.weights[static_cast<Index>(g)]);
  }
  unit.snp_weights =
      Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  unit.gene_weights =
      Eigen::Map<const Vector>(q.data(), static_cast<Index>(q.size()));
  unit.validate();
  return unit;
}

double spu_gene_stat(const Vector& u, const Vector& weights, double gamma) {
  if (weights.size() != 0 && weights.size() != u.size()) {
    throw ConfigError("SNP weights do not align with the score vector");
  }
  Vector w = u.cwiseAbs();
  if (weights.size() != 0) w = w.cwiseProduct(weights);
  return powered_norm(w.data(), w.size(), gamma);
}

double spu_pathway_stat(const Vector& u, const TestUnit& unit, double gamma,
                        double gamma_g) {
  if (!unit.pathway) {
    throw ConfigError("pathway statistic needs a pathway unit");
  }
  if (std::isinf(gamma) || std::isinf(gamma_g)) {
    throw ConfigError("pathway exponents must be finite");
  }
  if (u.size() != static_cast<Index>(unit.cols.size())) {
    throw ConfigError("score vector does not align with the unit");
  }
  const Vector w = u.cwiseAbs().cwiseProduct(unit.snp_weights);
  double stat = 0.0;
  Index offset = 0;
  for (std::size_t g = 0; g < unit.gene_sizes.size(); ++g) {
    const Index k = unit.gene_sizes[g];
    const double top =
        Eigen::Map<const Vector>(w.data() + offset, k).maxCoeff();
    double inner = 0.0;
    if (top > 0.0) {
      double sum = 0.0;
      for (Index j = 0; j < k; ++j) {
        sum += powered(w[offset + j] / top, gamma);
      }
      inner = top * std::pow(sum / static_cast<double>(k), 1.0 / gamma);
    }
    stat += std::pow(unit.gene_weights[static_cast<Index>(g)] * inner,
                     gamma_g);
    offset += k;
  }
  return stat;
}

Vector spu_stats(const Vector& u, const TestUnit& unit,
                 const GammaGrid& grid) {
  const Index combos = grid.combo_count(unit.pathway);
  Vector out(combos);
  Index c = 0;
  if (!unit.pathway) {
    for (double g : grid.snp_gammas) {
      out[c++] = spu_gene_stat(u, unit.snp_weights, g);
    }
    return out;
  }
  for (double g : grid.snp_gammas) {
    for (double gg : grid.gene_gammas) {
      out[c++] = spu_pathway_stat(u, unit, g, gg);
    }
  }
  return out;
}

EmpiricalPvalues empirical_pvalues(const Matrix& stats) {
  const Index rows = stats.rows();
  const Index combos = stats.cols();
  if (rows < 2) {
    throw ConfigError("empirical p-values need at least one permutation");
  }
  EmpiricalPvalues out;
  out.p.resize(rows, combos);
  out.p_min = Vector::Constant(rows, 1.0);
  std::vector<double> sorted(static_cast<std::size_t>(rows));
  for (Index c = 0; c < combos; ++c) {
    for (Index b = 0; b < rows; ++b) {
      sorted[static_cast<std::size_t>(b)] = stats(b, c);
    }
    std::sort(sorted.begin(), sorted.end());
    for (Index b = 0; b < rows; ++b) {
      const auto at_least = sorted.end() - std::lower_bound(sorted.begin(),
                                                            sorted.end(),
                                                            stats(b, c));
      out.p(b, c) =
          static_cast<double>(at_least) / static_cast<double>(rows);
      out.p_min[b] = std::min(out.p_min[b], out.p(b, c));
    }
  }
  return out;
}

double aspus_pvalue(const Vector& p_min, bool plus_one) {
  const Index rows = p_min.size();
  if (rows < 2) {
    throw ConfigError("adaptive p-value needs at least one permutation");
  }
  Index count = plus_one ? 1 : 0;
  for (Index b = 1; b < rows; ++b) {
    count += (p_min[b] <= p_min[0]);
  }
  return static_cast<double>(count) / static_cast<double>(rows);
}

std::vector<Index> unit_permutation(std::uint64_t seed,
                                    const std::string& unit_id, Index b,
                                    Index n) {
  Rng rng(substream(seed, fnv1a64(unit_id),
                    static_cast<std::uint64_t>(b)));
  std::vector<Index> perm;
  fisher_yates(perm, n, rng);
  return perm;
}

SpuResult run_adaptive_test(const SurvivalDataset& ds, const WeightTable& wt,
                            const TestUnit& unit, const GammaGrid& grid,
                            const PermPlan& plan) {
  unit.validate();
  grid.validate(unit.pathway);
  plan.validate();
  for (Index col : unit.cols) {
    if (col < 0 || col >= ds.geno.cols()) {
      throw ConfigError("test unit '" + unit.id +
                        "' references a genotype column that does not exist");
    }
  }

  const Index n = ds.n();
  const Index combos = grid.combo_count(unit.pathway);
  Matrix stats(plan.b_total + 1, combos);

  Vector u;
  score_columns(ds.geno, unit.cols, wt.score_coef, u);
  stats.row(0) = spu_stats(u, unit, grid).transpose();

  const auto run_batch = [&](Index from, Index to) {
    for (Index b = from; b <= to; ++b) {
      const std::vector<Index> perm =
          unit_permutation(plan.seed, unit.id, b, n);
      const Vector coef = permuted_coef(wt.score_coef, perm);
      score_columns(ds.geno, unit.cols, coef, u);
      stats.row(b) = spu_stats(u, unit, grid).transpose();
    }
  };

  run_batch(1, plan.b_init);
  const EmpiricalPvalues initial =
      empirical_pvalues(stats.topRows(plan.b_init + 1));
  const double p_init = aspus_pvalue(initial.p_min, plan.plus_one);

  SpuResult res;
  res.unit_id = unit.id;
  res.pathway = unit.pathway;
  res.n_snps = static_cast<Index>(unit.cols.size());
  res.stat_obs = stats.row(0).transpose();

  const auto copy_observed_p = [&res, combos](const EmpiricalPvalues& ep) {
    res.p_spu.resize(static_cast<std::size_t>(combos));
    for (Index c = 0; c < combos; ++c) {
      res.p_spu[static_cast<std::size_t>(c)] = ep.p(0, c);
    }
  };

  if (p_init >= plan.theta) {
    copy_observed_p(initial);
    res.p_min = initial.p_min[0];
    res.p_aspus = p_init;
    res.perms_used = plan.b_init;
    res.early_stopped = true;
    return res;
  }

  run_batch(plan.b_init + 1, plan.b_total);
  const EmpiricalPvalues full = empirical_pvalues(stats);
  copy_observed_p(full);
  res.p_min = full.p_min[0];
  res.p_aspus = aspus_pvalue(full.p_min, plan.plus_one);
  res.perms_used = plan.b_total;
  res.early_stopped = false;
  return res;
}

std::vector<SpuResult> run_units(const SurvivalDataset& ds,
                                 const WeightTable& wt,
                                 const std::vector<TestUnit>& units,
                                 const GammaGrid& grid, const PermPlan& plan,
                                 int workers) {
  std::vector<SpuResult> results(units.size());
  parallel_for(static_cast<Index>(units.size()), workers, [&](Index i) {
    results[static_cast<std::size_t>(i)] = run_adaptive_test(
        ds, wt, units[static_cast<std::size_t>(i)], grid, plan);
  });
  return results;
}

void write_results_csv(const std::string& path,
                       const std::vector<SpuResult>& results,
                       const GammaGrid& grid) {
  const bool pathway = !results.empty() && results.front().pathway;
  const std::vector<std::string> labels = combo_labels(grid, pathway);
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot open '" + path + "' for writing");
  }
  out << "unit_id,unit_type,n_snps,p_aspus,perms_used,early_stopped";
  for (const auto& label : labels) out << ",p_spu_" << label;
  out << '\n';
  for (const SpuResult& r : results) {
    if (r.pathway != pathway) {
      throw ConfigError("cannot mix gene and pathway rows in one results file");
    }
    if (r.p_spu.size() != labels.size()) {
      throw ConfigError("result for '" + r.unit_id +
                        "' does not match the exponent grid");
    }
    out << r.unit_id << ',' << (pathway ? "pathway" : "gene") << ','
        << r.n_snps << ',' << csv::format_real(r.p_aspus) << ','
        << r.perms_used << ',' << (r.early_stopped ? 1 : 0);
    for (double p : r.p_spu) out << ',' << csv::format_real(p);
    out << '\n';
  }
  if (!out) {
    throw Error("write failed for '" + path + "'");
  }
}

}  // namespace aspus
