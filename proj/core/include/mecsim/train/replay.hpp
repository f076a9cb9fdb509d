#pragma once

#include <cstdint>
#include <vector>

#include "mecsim/numkit/rng.hpp"

namespace mecsim::train {

/// One stored interaction. Vectors are padded; inactive device slots are
/// exactly zero in s, a and s_next.
struct TransitionSample {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  std::vector<std::uint8_t> mask;
};

/// Fixed-capacity ring with FIFO eviction and uniform with-replacement
/// sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }

  void push(TransitionSample t);
  const TransitionSample& sample(numkit::Rng& rng) const;
  const TransitionSample& at(std::size_t i) const { return storage_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // ring write position once full
  std::vector<TransitionSample> storage_;
};

}  // namespace mecsim::train
