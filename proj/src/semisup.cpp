#include "aop3d/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>

#include <Eigen/Eigenvalues>

#include "aop3d/error.hpp"
#include "json.hpp"

namespace aop3d::semisup {

ReducedFeatures pca_reduce(const Eigen::MatrixXd& features, double variance_kept) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw ParameterError("PCA needs at least 2 rows");
  if (!(variance_kept > 0.0 && variance_kept <= 1.0)) throw ParameterError("variance_kept must be in (0, 1]");
  if (!features.allFinite()) throw ParameterError("features contain non-finite values");
  ReducedFeatures r;
  std::vector<double> means, scales;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double m = features.col(c).mean();
    const double var = (features.col(c).array() - m).square().sum() / static_cast<double>(n - 1);
    if (var <= 1e-24 * std::max(1.0, m * m)) continue;
    r.columns.push_back(static_cast<std::size_t>(c));
    means.push_back(m);
    scales.push_back(std::sqrt(var));
  }
  const auto m = static_cast<Eigen::Index>(r.columns.size());
  if (m == 0) throw ParameterError("every feature column is constant");
  r.mean = Eigen::Map<Eigen::VectorXd>(means.data(), m);
  r.scale = Eigen::Map<Eigen::VectorXd>(scales.data(), m);
  Eigen::MatrixXd z(n, m);
  for (Eigen::Index c = 0; c < m; ++c)
    z.col(c) = (features.col(static_cast<Eigen::Index>(r.columns[c])).array() - r.mean[c]) / r.scale[c];
  const Eigen::MatrixXd cov = z.transpose() * z / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  r.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double total = r.eigenvalues.sum();
  const double top = r.eigenvalues[0];
  Eigen::Index rank = 0;
  while (rank < m && r.eigenvalues[rank] > 1e-10 * top) ++rank;
  Eigen::Index d = 0;
  double mass = 0;
  while (d < rank) {
    mass += r.eigenvalues[d++];
    if (mass >= variance_kept * total * (1 - 1e-12)) break;
  }
  r.retained = mass / total;
  r.basis = vectors.leftCols(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < m; ++i)
      if (std::abs(r.basis(i, k)) > std::abs(r.basis(arg, k)) + 1e-12) arg = i;
    if (r.basis(arg, k) < 0) r.basis.col(k) *= -1.0;
  }
  r.x = z * r.basis;
  return r;
}

double default_gamma(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  std::vector<double> d;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  return med > 0 ? 1.0 / (2.0 * med * med) : 1.0;
}

SpreadResult label_spread(const Eigen::MatrixXd& x, const SeedLabels& seeds, const SpreadOptions& opts) {
  const Eigen::Index n = x.rows();
  if (n < 1) throw ParameterError("label spreading needs at least one point");
  if (seeds.seeds.empty()) throw ParameterError("label spreading needs at least one seed");
  if (seeds.classes < 1) throw ParameterError("class count must be positive");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ParameterError("alpha must be in (0, 1)");
  if (opts.gamma && !(*opts.gamma > 0.0)) throw ParameterError("gamma must be > 0");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw ParameterError("tol must be > 0 and iters >= 1");
  const int C = seeds.classes;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, C);
  std::vector<std::size_t> seed_count(static_cast<std::size_t>(C), 0);
  for (const auto& [i, c] : seeds.seeds) {
    if (i >= static_cast<std::size_t>(n)) throw ParameterError("seed index out of range");
    if (c < 0 || c >= C) throw ParameterError("seed class out of range");
    Y(static_cast<Eigen::Index>(i), c) = 1.0;
    ++seed_count[static_cast<std::size_t>(c)];
  }
  SpreadResult r;
  r.gamma = opts.gamma ? *opts.gamma : default_gamma(x);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) S(i, j) = S(j, i) = std::exp(-r.gamma * (x.row(i) - x.row(j)).squaredNorm());
  const Eigen::VectorXd deg = S.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
  S = inv_sqrt.asDiagonal() * S * inv_sqrt.asDiagonal();

  Eigen::MatrixXd F = Y;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    Eigen::MatrixXd next = opts.alpha * (S * F) + (1.0 - opts.alpha) * Y;
    const double change = (next - F).cwiseAbs().maxCoeff();
    F = std::move(next);
    r.changes.push_back(change);
    r.iterations = it + 1;
    if (change < opts.tol) break;
  }
  r.f = F;

  const int majority = static_cast<int>(std::max_element(seed_count.begin(), seed_count.end()) - seed_count.begin());
  r.labels.resize(static_cast<std::size_t>(n));
  r.confidence.resize(static_cast<std::size_t>(n));
  r.unreachable.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double sum = F.row(i).sum();
    if (!(sum > 0.0)) {
      r.unreachable[u] = true;
      r.labels[u] = majority;
      r.confidence[u] = 0.0;
      continue;
    }
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (F(i, c) > F(i, best)) best = c;
    r.labels[u] = best;
    r.confidence[u] = F(i, best) / sum;
  }
  return r;
}

SeedFile read_seeds(std::istream& in) {
  SeedFile f;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [key, cls] : j.at("labels").items()) f.labels[key] = cls.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid seeds JSON: ") + e.what());
  }
  return f;
}

SeedLabels resolve_seeds(const SeedFile& file, const std::vector<std::string>& keys, std::vector<int>& class_ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < keys.size(); ++i) index[keys[i]] = i;
  std::set<int> ids;
  for (const auto& [key, c] : file.labels) {
    if (!index.contains(key)) throw DatasetError("seed '" + key + "' does not match any feature row");
    ids.insert(c);
  }
  class_ids.assign(ids.begin(), ids.end());
  SeedLabels s;
  s.classes = static_cast<int>(class_ids.size());
  for (const auto& [key, c] : file.labels) {
    s.seeds[index.at(key)] = static_cast<int>(std::lower_bound(class_ids.begin(), class_ids.end(), c) - class_ids.begin());
  }
  return s;
}

void write_pseudo_labels(const std::vector<std::string>& keys, const SpreadResult& r, const SeedLabels& seeds,
                         const std::vector<int>& class_ids, std::ostream& out) {
  out << "image,id,label,confidence,seeded,unreachable\n" << std::setprecision(17);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto slash = keys[i].rfind('/');
    out << keys[i].substr(0, slash) << ',' << keys[i].substr(slash + 1) << ','
        << class_ids.at(static_cast<std::size_t>(r.labels[i])) << ',' << r.confidence[i] << ','
        << (seeds.seeds.contains(i) ? 1 : 0) << ',' << (r.unreachable[i] ? 1 : 0) << '\n';
  }
}

}  // namespace aop3d::semisup
