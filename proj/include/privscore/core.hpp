#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace privscore {

/// Raised when input data violates a structural invariant (bad shape,
/// duplicate identifier, negative byte count, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical quantity is undefined for the given input
/// (zero variance, zero range, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class IdIndex {
 public:
  IdIndex() = default;
  explicit IdIndex(std::vector<std::string> ids, const char* what) : ids_(std::move(ids)) {
    if (ids_.empty()) throw ValidationError(std::string(what) + " list must not be empty");
    lookup_.reserve(ids_.size());
    for (std::size_t k = 0; k < ids_.size(); ++k) {
      if (ids_[k].empty()) throw ValidationError(std::string(what) + " identifier must not be empty");
      if (!lookup_.emplace(ids_[k], k).second)
        throw ValidationError("duplicate " + std::string(what) + " identifier '" + ids_[k] + "'");
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& at(std::size_t k) const { return ids_.at(k); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const IdIndex& o) const { return ids_ == o.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace detail

/// Ordered profile items. Index i addresses rows of every item x user matrix.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<std::string> items) : index_(std::move(items), "item") {}

  std::size_t size() const noexcept { return index_.size(); }
  const std::vector<std::string>& ids() const noexcept { return index_.ids(); }
  const std::string& id(std::size_t i) const { return index_.at(i); }
  std::optional<std::size_t> find(std::string_view id) const { return index_.find(id); }
  bool operator==(const ItemCatalog&) const = default;

 private:
  detail::IdIndex index_;
};

/// Ordered users. Index j addresses columns of every item x user matrix.
class UserRegistry {
 public:
  UserRegistry() = default;
  explicit UserRegistry(std::vector<std::string> users) : index_(std::move(users), "user") {}

  std::size_t size() const noexcept { return index_.size(); }
  const std::vector<std::string>& ids() const noexcept { return index_.ids(); }
  const std::string& id(std::size_t j) const { return index_.at(j); }
  std::optional<std::size_t> find(std::string_view id) const { return index_.find(id); }
  bool operator==(const UserRegistry&) const = default;

 private:
  detail::IdIndex index_;
};

/// Dense item x user matrix, row-major (one row per item).
template <typename T>
class ItemUserMatrix {
 public:
  using value_type = T;

  ItemUserMatrix() = default;
  ItemUserMatrix(ItemCatalog catalog, UserRegistry registry, T fill = T{})
      : catalog_(std::move(catalog)),
        registry_(std::move(registry)),
        cells_(catalog_.size() * registry_.size(), fill) {}
  ItemUserMatrix(ItemCatalog catalog, UserRegistry registry, std::vector<T> cells)
      : catalog_(std::move(catalog)), registry_(std::move(registry)), cells_(std::move(cells)) {
    if (cells_.size() != catalog_.size() * registry_.size())
      throw ValidationError("matrix cell count does not match catalog x registry");
  }

  const ItemCatalog& catalog() const noexcept { return catalog_; }
  const UserRegistry& registry() const noexcept { return registry_; }
  std::size_t items() const noexcept { return catalog_.size(); }
  std::size_t users() const noexcept { return registry_.size(); }

  T operator()(std::size_t i, std::size_t j) const { return cells_[i * users() + j]; }
  T& operator()(std::size_t i, std::size_t j) { return cells_[i * users() + j]; }

  T at(std::size_t i, std::size_t j) const {
    check(i, j);
    return (*this)(i, j);
  }

  std::span<const T> row(std::size_t i) const {
    if (i >= items()) throw std::out_of_range("item index out of range");
    return {cells_.data() + i * users(), users()};
  }

  const std::vector<T>& cells() const noexcept { return cells_; }

  bool operator==(const ItemUserMatrix&) const = default;

 protected:
  void check(std::size_t i, std::size_t j) const {
    if (i >= items()) throw std::out_of_range("item index out of range");
    if (j >= users()) throw std::out_of_range("user index out of range");
  }

  ItemCatalog catalog_;
  UserRegistry registry_;
  std::vector<T> cells_;
};

/// Binary share/hide matrix R: 1 means the item is publicly shared.
class ResponseMatrix : public ItemUserMatrix<std::uint8_t> {
 public:
  ResponseMatrix() = default;
  ResponseMatrix(ItemCatalog catalog, UserRegistry registry)
      : ItemUserMatrix(std::move(catalog), std::move(registry), std::uint8_t{0}) {}
  ResponseMatrix(ItemCatalog catalog, UserRegistry registry, std::vector<std::uint8_t> cells)
      : ItemUserMatrix(std::move(catalog), std::move(registry), std::move(cells)) {
    for (auto c : cells_)
      if (c > 1) throw ValidationError("response cells must be 0 or 1");
  }
};

/// Shared bytes per (item, user).
class GranularityMatrix : public ItemUserMatrix<std::int64_t> {
 public:
  GranularityMatrix() = default;
  GranularityMatrix(ItemCatalog catalog, UserRegistry registry)
      : ItemUserMatrix(std::move(catalog), std::move(registry), std::int64_t{0}) {}
  GranularityMatrix(ItemCatalog catalog, UserRegistry registry, std::vector<std::int64_t> cells)
      : ItemUserMatrix(std::move(catalog), std::move(registry), std::move(cells)) {
    for (auto c : cells_)
      if (c < 0) throw ValidationError("granularity cells must be non-negative");
  }
};

/// Discrete granularity levels in [0, max_level]; 0 means not shared.
class GranularityLevelMatrix : public ItemUserMatrix<int> {
 public:
  GranularityLevelMatrix() = default;
  GranularityLevelMatrix(ItemCatalog catalog, UserRegistry registry, int max_level)
      : ItemUserMatrix(std::move(catalog), std::move(registry), 0), max_level_(max_level) {
    if (max_level < 1) throw ValidationError("max level must be >= 1");
  }
  GranularityLevelMatrix(ItemCatalog catalog, UserRegistry registry, std::vector<int> cells,
                         int max_level)
      : ItemUserMatrix(std::move(catalog), std::move(registry), std::move(cells)),
        max_level_(max_level) {
    if (max_level < 1) throw ValidationError("max level must be >= 1");
    for (auto c : cells_)
      if (c < 0 || c > max_level_) throw ValidationError("level cell outside [0, max level]");
  }

  int max_level() const noexcept { return max_level_; }

  bool operator==(const GranularityLevelMatrix&) const = default;

 private:
  int max_level_ = 3;
};

enum class ScoreModel { PSN, PSI, PSGN, PSGI, PSC_PRC, PSC_EVC, PSC_CC, PSC_BC, PSNA };

inline std::string_view to_string(ScoreModel m) {
  switch (m) {
    case ScoreModel::PSN: return "PSN";
    case ScoreModel::PSI: return "PSI";
    case ScoreModel::PSGN: return "PSGN";
    case ScoreModel::PSGI: return "PSGI";
    case ScoreModel::PSC_PRC: return "PSC-PRC";
    case ScoreModel::PSC_EVC: return "PSC-EVC";
    case ScoreModel::PSC_CC: return "PSC-CC";
    case ScoreModel::PSC_BC: return "PSC-BC";
    case ScoreModel::PSNA: return "PSNA";
  }
  return "?";
}

/// One privacy score per user for a single model.
class ScoreVector {
 public:
  ScoreVector() = default;
  ScoreVector(UserRegistry registry, ScoreModel model, std::vector<double> values)
      : registry_(std::move(registry)), model_(model), values_(std::move(values)) {
    if (values_.size() != registry_.size())
      throw ValidationError("score vector length does not match registry");
    for (double v : values_)
      if (!std::isfinite(v))
        throw NumericalError(std::string(to_string(model_)) + " produced a non-finite score");
  }

  const UserRegistry& registry() const noexcept { return registry_; }
  ScoreModel model() const noexcept { return model_; }
  std::string_view label() const { return to_string(model_); }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const& noexcept { return values_; }
  // Returning by value from temporaries keeps range-for loops safe.
  std::vector<double> values() && { return std::move(values_); }

 private:
  UserRegistry registry_;
  ScoreModel model_ = ScoreModel::PSN;
  std::vector<double> values_;
};

/// R(i,j) = 1 iff the user shared a non-empty payload for the item.
inline ResponseMatrix build_response_matrix(const GranularityMatrix& gm) {
  std::vector<std::uint8_t> cells(gm.cells().size());
  std::transform(gm.cells().begin(), gm.cells().end(), cells.begin(),
                 [](std::int64_t b) { return static_cast<std::uint8_t>(b > 0 ? 1 : 0); });
  return ResponseMatrix(gm.catalog(), gm.registry(), std::move(cells));
}

/// Induced response matrix of a level matrix (level > 0 means shared).
inline ResponseMatrix build_response_matrix(const GranularityLevelMatrix& glm) {
  std::vector<std::uint8_t> cells(glm.cells().size());
  std::transform(glm.cells().begin(), glm.cells().end(), cells.begin(),
                 [](int k) { return static_cast<std::uint8_t>(k > 0 ? 1 : 0); });
  return ResponseMatrix(glm.catalog(), glm.registry(), std::move(cells));
}

/// |R_i|: number of users sharing item i.
inline std::size_t row_share_count(const ResponseMatrix& r, std::size_t i) {
  auto row = r.row(i);
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), std::uint8_t{1}));
}

/// |R^j|: number of items user j shares.
inline std::size_t column_share_count(const ResponseMatrix& r, std::size_t j) {
  if (j >= r.users()) throw std::out_of_range("user index out of range");
  std::size_t count = 0;
  for (std::size_t i = 0; i < r.items(); ++i) count += r(i, j);
  return count;
}

inline std::vector<std::size_t> row_share_counts(const ResponseMatrix& r) {
  std::vector<std::size_t> out(r.items());
  for (std::size_t i = 0; i < r.items(); ++i) out[i] = row_share_count(r, i);
  return out;
}

inline std::vector<std::size_t> column_share_counts(const ResponseMatrix& r) {
  std::vector<std::size_t> out(r.users(), 0);
  for (std::size_t i = 0; i < r.items(); ++i)
    for (std::size_t j = 0; j < r.users(); ++j) out[j] += r(i, j);
  return out;
}

/// Reorders the columns of a matrix: column j of the result is column perm[j] of m.
template <typename Matrix>
Matrix permute_users(const Matrix& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.users()) throw ValidationError("permutation size mismatch");
  std::vector<std::string> ids(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) ids[j] = m.registry().id(perm[j]);
  std::vector<typename Matrix::value_type> cells(m.cells().size());
  for (std::size_t i = 0; i < m.items(); ++i)
    for (std::size_t j = 0; j < m.users(); ++j) cells[i * m.users() + j] = m(i, perm[j]);
  if constexpr (std::is_same_v<Matrix, GranularityLevelMatrix>)
    return Matrix(m.catalog(), UserRegistry(std::move(ids)), std::move(cells), m.max_level());
  else
    return Matrix(m.catalog(), UserRegistry(std::move(ids)), std::move(cells));
}

}  // namespace privscore
