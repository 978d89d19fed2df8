#pragma once

#include <iterator>

#include "uvcloth/nn/network.hpp"

namespace uvcloth::model::detail {

// Borrows the gradient tensors of one network out of a combined list laid out
// in params() order, and moves them back on destruction.
class GradSlice {
 public:
  GradSlice(nn::Gradients* all, std::size_t offset, const nn::Network& net)
      : all_(all), offset_(offset) {
    if (!all_) return;
    const std::size_t n = net.params().size();
    local_.assign(std::make_move_iterator(all_->begin() + offset_),
                  std::make_move_iterator(all_->begin() + offset_ + n));
  }
  ~GradSlice() {
    if (!all_) return;
    std::move(local_.begin(), local_.end(), all_->begin() + offset_);
  }
  GradSlice(const GradSlice&) = delete;
  GradSlice& operator=(const GradSlice&) = delete;

  nn::Gradients& get() { return local_; }

 private:
  nn::Gradients* all_;
  std::size_t offset_;
  nn::Gradients local_;
};

inline void append(std::vector<nn::Tensor*>& out, nn::Network& net) {
  for (nn::Tensor* p : net.params()) out.push_back(p);
}

inline void append_zero(nn::Gradients& out, const nn::Network& net) {
  for (nn::Tensor& g : net.zero_gradients()) out.push_back(std::move(g));
}

inline std::size_t param_tensors(const nn::Network& net) { return net.params().size(); }

}  // namespace uvcloth::model::detail
