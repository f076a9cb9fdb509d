#include "mecsim/train/replay.hpp"

#include "mecsim/errors.hpp"

namespace mecsim::train {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ContractError("ReplayBuffer: capacity must be positive");
  storage_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(TransitionSample t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

const TransitionSample& ReplayBuffer::sample(numkit::Rng& rng) const {
  if (storage_.empty()) throw StateError("ReplayBuffer::sample: buffer is empty");
  return storage_[rng.uniform_int(0, static_cast<int>(storage_.size()) - 1)];
}

}  // namespace mecsim::train
