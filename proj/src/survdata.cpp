#include "aspus/survdata.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "aspus/csv.hpp"
#include "aspus/errors.hpp"

namespace aspus {

namespace {

std::string row_context(const std::string& path, std::size_t row_index) {
  // Data row r sits on physical line r + 2 (line 1 is the header).
  return path + " line " + std::to_string(row_index + 2);
}

void check_id(const std::string& id, const std::string& what,
              const std::string& where) {
  if (id.empty()) {
    throw ValidationError(where + ": empty " + what);
  }
}

std::unordered_map<std::string, Index> index_ids(
    const std::vector<std::string>& ids, const std::string& what,
    const std::string& path) {
  std::unordered_map<std::string, Index> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_id(ids[i], what, path);
    auto [it, inserted] = out.emplace(ids[i], static_cast<Index>(i));
    if (!inserted) {
      throw ValidationError(path + ": duplicate " + what + " '" + ids[i] +
                            "'");
    }
  }
  return out;
}

// Shared loader for the two wide files (genotypes, covariates): first column
// subject_id, remaining columns one real value per named variable. Rows are
// written into `values` at the position given by `subject_rows`.
struct WideFile {
  std::vector<std::string> col_ids;
  Matrix values;
};

WideFile load_wide(const std::string& path,
                   const std::unordered_map<std::string, Index>& subject_rows,
                   const std::string& col_what) {
  csv::Table table = csv::read(path);
  if (table.header.empty() || table.header[0] != "subject_id") {
    throw ValidationError(path + ": first header column must be subject_id");
  }
  WideFile out;
  out.col_ids.assign(table.header.begin() + 1, table.header.end());
  index_ids(out.col_ids, col_what, path);  // uniqueness check only

  const Index n = static_cast<Index>(subject_rows.size());
  const Index p = static_cast<Index>(out.col_ids.size());
  if (static_cast<Index>(table.rows.size()) != n) {
    throw AlignmentError(path + ": expected " + std::to_string(n) +
                         " subject rows, found " +
                         std::to_string(table.rows.size()));
  }
  out.values.resize(n, p);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string& sid = row[0];
    auto it = subject_rows.find(sid);
    if (it == subject_rows.end()) {
      throw AlignmentError(row_context(path, r) + ": subject '" + sid +
                           "' not present in the phenotype file");
    }
    const Index dest = it->second;
    if (seen[static_cast<std::size_t>(dest)]) {
      throw ValidationError(row_context(path, r) + ": duplicate subject '" +
                            sid + "'");
    }
    seen[static_cast<std::size_t>(dest)] = true;
    for (Index c = 0; c < p; ++c) {
      out.values(dest, c) = csv::parse_real(
          row[static_cast<std::size_t>(c) + 1],
          row_context(path, r) + ", column '" +
              out.col_ids[static_cast<std::size_t>(c)] + "'");
    }
  }
  return out;
}

}  // namespace

Index SurvivalDataset::event_count() const {
  Index e = 0;
  for (Index i = 0; i < status.size(); ++i) {
    e += (status[i] == 1);
  }
  return e;
}

void SurvivalDataset::validate() const {
  const Index nn = n();
  if (geno.rows() != nn || covar.rows() != nn || time.size() != nn ||
      status.size() != nn) {
    throw ValidationError("dataset arrays disagree on subject count");
  }
  if (geno.cols() != static_cast<Index>(snp_ids.size())) {
    throw ValidationError("genotype column count does not match SNP id list");
  }
  if (covar.cols() != static_cast<Index>(covar_ids.size())) {
    throw ValidationError(
        "covariate column count does not match covariate id list");
  }
  std::unordered_set<std::string> ids;
  for (const auto& s : subject_ids) {
    check_id(s, "subject id", "dataset");
    if (!ids.insert(s).second) {
      throw ValidationError("dataset: duplicate subject id '" + s + "'");
    }
  }
  for (Index i = 0; i < nn; ++i) {
    if (!std::isfinite(time[i]) || time[i] <= 0.0) {
      throw ValidationError("subject '" + subject_ids[static_cast<std::size_t>(
                                              i)] +
                            "': time must be a positive finite value");
    }
    if (status[i] != 0 && status[i] != 1) {
      throw ValidationError("subject '" + subject_ids[static_cast<std::size_t>(
                                              i)] +
                            "': status must be 0 or 1");
    }
    for (Index c = 0; c < geno.cols(); ++c) {
      const double g = geno(i, c);
      if (!std::isfinite(g) || g < 0.0 || g > 2.0) {
        throw ValidationError(
            "subject '" + subject_ids[static_cast<std::size_t>(i)] +
            "', SNP '" + snp_ids[static_cast<std::size_t>(c)] +
            "': dosage must lie in [0, 2]");
      }
    }
    for (Index c = 0; c < covar.cols(); ++c) {
      if (!std::isfinite(covar(i, c))) {
        throw ValidationError(
            "subject '" + subject_ids[static_cast<std::size_t>(i)] +
            "', covariate '" + covar_ids[static_cast<std::size_t>(c)] +
            "': value must be finite");
      }
    }
  }
}

SurvivalDataset load_dataset(const std::string& geno_path,
                             const std::string& pheno_path,
                             const std::string& covar_path) {
  csv::Table pheno = csv::read(pheno_path);
  const std::vector<std::string> expect = {"subject_id", "time", "status"};
  if (pheno.header != expect) {
    throw ValidationError(pheno_path +
                          ": header must be subject_id,time,status");
  }

  SurvivalDataset ds;
  const Index n = static_cast<Index>(pheno.rows.size());
  ds.subject_ids.reserve(static_cast<std::size_t>(n));
  ds.time.resize(n);
  ds.status.resize(n);
  for (std::size_t r = 0; r < pheno.rows.size(); ++r) {
    ds.subject_ids.push_back(pheno.rows[r][0]);
    const std::string where = row_context(pheno_path, r);
    ds.time[static_cast<Index>(r)] =
        csv::parse_real(pheno.rows[r][1], where + ", column 'time'");
    ds.status[static_cast<Index>(r)] =
        csv::parse_status(pheno.rows[r][2], where + ", column 'status'");
  }
  auto subject_rows = index_ids(ds.subject_ids, "subject id", pheno_path);

  WideFile geno = load_wide(geno_path, subject_rows, "SNP id");
  ds.snp_ids = std::move(geno.col_ids);
  ds.geno = std::move(geno.values);

  if (covar_path.empty()) {
    ds.covar.resize(n, 0);
  } else {
    WideFile covar = load_wide(covar_path, subject_rows, "covariate id");
    ds.covar_ids = std::move(covar.col_ids);
    ds.covar = std::move(covar.values);
  }

  ds.validate();
  return ds;
}

namespace {

void write_table(const std::string& path, const std::string& header,
                 const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot open '" + path + "' for writing");
  }
  out << header << '\n';
  body(out);
  if (!out) {
    throw Error("write failed for '" + path + "'");
  }
}

}  // namespace

void save_dataset(const SurvivalDataset& ds, const std::string& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  const auto join = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };

  std::string geno_header = "subject_id";
  for (const auto& s : ds.snp_ids) geno_header += "," + s;
  write_table(join("geno.csv"), geno_header, [&ds](std::ostream& out) {
    for (Index i = 0; i < ds.n(); ++i) {
      out << ds.subject_ids[static_cast<std::size_t>(i)];
      for (Index c = 0; c < ds.geno.cols(); ++c) {
        out << ',' << csv::format_real(ds.geno(i, c));
      }
      out << '\n';
    }
  });

  write_table(join("pheno.csv"), "subject_id,time,status",
              [&ds](std::ostream& out) {
                for (Index i = 0; i < ds.n(); ++i) {
                  out << ds.subject_ids[static_cast<std::size_t>(i)] << ','
                      << csv::format_real(ds.time[i]) << ',' << ds.status[i]
                      << '\n';
                }
              });

  if (ds.covar.cols() > 0) {
    std::string covar_header = "subject_id";
    for (const auto& s : ds.covar_ids) covar_header += "," + s;
    write_table(join("covar.csv"), covar_header, [&ds](std::ostream& out) {
      for (Index i = 0; i < ds.n(); ++i) {
        out << ds.subject_ids[static_cast<std::size_t>(i)];
        for (Index c = 0; c < ds.covar.cols(); ++c) {
          out << ',' << csv::format_real(ds.covar(i, c));
        }
        out << '\n';
      }
    });
  }
}

Index GeneMap::find(const std::string& gene_id) const {
  for (std::size_t g = 0; g < genes.size(); ++g) {
    if (genes[g].id == gene_id) return static_cast<Index>(g);
  }
  return -1;
}

namespace {

// Both membership files share one shape: child_id, parent_id, optional
// positive weight. Resolves children against `child_index`, groups rows by
// parent in order of first appearance, and reports skipped rows.
struct Memberships {
  std::vector<std::string> parent_ids;
  std::vector<std::vector<Index>> child_cols;
  std::vector<std::vector<double>> child_weights;
  std::vector<std::string> warnings;
};

Memberships load_memberships(
    const std::string& path,
    const std::unordered_map<std::string, Index>& child_index,
    const std::string& child_col, const std::string& parent_col,
    const std::string& child_what) {
  csv::Table table = csv::read(path);
  const bool has_weight = table.header.size() == 3;
  const std::vector<std::string> two = {child_col, parent_col};
  const std::vector<std::string> three = {child_col, parent_col, "weight"};
  if (table.header != two && table.header != three) {
    throw ValidationError(path + ": header must be " + child_col + "," +
                          parent_col + "[,weight]");
  }

  Memberships out;
  std::unordered_map<std::string, std::size_t> parent_pos;
  std::set<std::pair<std::string, std::string>> seen_pairs;
  std::unordered_set<std::string> skipped_parents;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = row_context(path, r);
    check_id(row[0], child_col, where);
    check_id(row[1], parent_col, where);
    if (!seen_pairs.insert({row[0], row[1]}).second) {
      throw ValidationError(where + ": duplicate membership of '" + row[0] +
                            "' in '" + row[1] + "'");
    }
    double weight = 1.0;
    if (has_weight) {
      weight = csv::parse_real(row[2], where + ", column 'weight'");
      if (weight <= 0.0) {
        throw ValidationError(where + ": weight must be positive");
      }
    }
    auto child_it = child_index.find(row[0]);
    if (child_it == child_index.end()) {
      out.warnings.push_back(where + ": " + child_what + " '" + row[0] +
                             "' not found; row skipped");
      skipped_parents.insert(row[1]);
      continue;
    }
    auto [pos_it, inserted] =
        parent_pos.emplace(row[1], out.parent_ids.size());
    if (inserted) {
      out.parent_ids.push_back(row[1]);
      out.child_cols.emplace_back();
      out.child_weights.emplace_back();
    }
    out.child_cols[pos_it->second].push_back(child_it->second);
    out.child_weights[pos_it->second].push_back(weight);
  }
  for (const auto& parent : skipped_parents) {
    if (!parent_pos.count(parent)) {
      out.warnings.push_back(path + ": '" + parent + "' has no " +
                             child_what + "s present; dropped");
    }
  }
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

GeneMap load_genemap(const std::string& path, const SurvivalDataset& ds) {
  std::unordered_map<std::string, Index> snp_index;
  for (std::size_t c = 0; c < ds.snp_ids.size(); ++c) {
    snp_index.emplace(ds.snp_ids[c], static_cast<Index>(c));
  }
  Memberships m =
      load_memberships(path, snp_index, "snp_id", "gene_id", "SNP");
  GeneMap out;
  out.warnings = std::move(m.warnings);
  out.genes.reserve(m.parent_ids.size());
  for (std::size_t g = 0; g < m.parent_ids.size(); ++g) {
    out.genes.push_back({std::move(m.parent_ids[g]), std::move(m.child_cols[g]),
                         to_vector(m.child_weights[g])});
  }
  return out;
}

PathwayMap load_pathwaymap(const std::string& path, const GeneMap& genemap) {
  std::unordered_map<std::string, Index> gene_index;
  for (std::size_t g = 0; g < genemap.genes.size(); ++g) {
    gene_index.emplace(genemap.genes[g].id, static_cast<Index>(g));
  }
  Memberships m =
      load_memberships(path, gene_index, "gene_id", "pathway_id", "gene");
  PathwayMap out;
  out.warnings = std::move(m.warnings);
  out.pathways.reserve(m.parent_ids.size());
  for (std::size_t p = 0; p < m.parent_ids.size(); ++p) {
    out.pathways.push_back({std::move(m.parent_ids[p]),
                            std::move(m.child_cols[p]),
                            to_vector(m.child_weights[p])});
  }
  return out;
}

}  // namespace aspus
