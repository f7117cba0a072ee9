#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace mmvae {

enum class Timestep { previous = 0, current = 1 };  // t-1, t

struct ModalityDescriptor {
  std::string name;
  std::size_t dim;  // per timestep
};

/// Ordered modalities, each present at t-1 and t. The flat vector stores
/// modalities in order; within a modality the t-1 block precedes the t block.
class ModalityLayout {
 public:
  explicit ModalityLayout(std::vector<ModalityDescriptor> modalities)
      : modalities_(std::move(modalities)) {
    if (modalities_.empty()) throw ConfigurationError("layout has no modalities");
    std::size_t offset = 0;
    for (const auto& m : modalities_) {
      if (m.dim == 0)
        throw ConfigurationError("modality '" + m.name + "' has zero dimension");
      offsets_.push_back(offset);
      offset += 2 * m.dim;
    }
    total_ = offset;
  }

  /// joint=4, vision=4, touch=1, sound=1, motor=4; 28 entries in total.
  static const ModalityLayout& standard() {
    static const ModalityLayout layout({{"joint", 4},
                                        {"vision", 4},
                                        {"touch", 1},
                                        {"sound", 1},
                                        {"motor", 4}});
    return layout;
  }

  std::size_t modality_count() const { return modalities_.size(); }
  std::size_t total_dim() const { return total_; }
  const ModalityDescriptor& modality(std::size_t m) const {
    return modalities_.at(m);
  }
  const std::vector<ModalityDescriptor>& modalities() const {
    return modalities_;
  }

  std::size_t dim(std::size_t m) const { return modalities_.at(m).dim; }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t m = 0; m < modalities_.size(); ++m)
      if (modalities_[m].name == name) return m;
    throw UsageError("unknown modality '" + std::string(name) + "'");
  }

  /// Position of (modality, timestep, dim) in the flat vector.
  std::size_t index(std::size_t m, Timestep t, std::size_t d) const {
    if (m >= modalities_.size() || d >= modalities_[m].dim)
      throw UsageError("layout index out of range");
    return offsets_[m] + static_cast<std::size_t>(t) * modalities_[m].dim + d;
  }

  struct Coordinate {
    std::size_t modality;
    Timestep timestep;
    std::size_t dim;
  };

  Coordinate coordinate(std::size_t flat) const {
    if (flat >= total_) throw UsageError("flat index out of range");
    std::size_t m = modalities_.size() - 1;
    while (offsets_[m] > flat) --m;
    const std::size_t local = flat - offsets_[m];
    const std::size_t d = modalities_[m].dim;
    return {m, local < d ? Timestep::previous : Timestep::current, local % d};
  }

  /// First flat index of modality m; its 2*dim(m) entries are contiguous.
  std::size_t offset(std::size_t m) const { return offsets_.at(m); }
  std::size_t width(std::size_t m) const { return 2 * dim(m); }

  /// I(M): both timesteps of modality m.
  std::vector<std::size_t> indices(std::size_t m) const {
    std::vector<std::size_t> out(width(m));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = offsets_[m] + i;
    return out;
  }

  std::vector<std::size_t> indices(std::size_t m, Timestep t) const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < dim(m); ++d) out.push_back(index(m, t, d));
    return out;
  }

  std::vector<std::size_t> all_indices() const {
    std::vector<std::size_t> out(total_);
    for (std::size_t i = 0; i < total_; ++i) out[i] = i;
    return out;
  }

  /// e.g. joint_tm1_0, motor_t_3
  std::string column_name(std::size_t flat) const {
    const auto c = coordinate(flat);
    return modalities_[c.modality].name +
           (c.timestep == Timestep::previous ? "_tm1_" : "_t_") +
           std::to_string(c.dim);
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < total_; ++i) out.push_back(column_name(i));
    return out;
  }

  friend bool operator==(const ModalityLayout& a, const ModalityLayout& b) {
    if (a.modalities_.size() != b.modalities_.size()) return false;
    for (std::size_t i = 0; i < a.modalities_.size(); ++i)
      if (a.modalities_[i].name != b.modalities_[i].name ||
          a.modalities_[i].dim != b.modalities_[i].dim)
        return false;
    return true;
  }

 private:
  std::vector<ModalityDescriptor> modalities_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

}  // namespace mmvae
