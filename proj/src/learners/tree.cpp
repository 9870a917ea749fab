#include <algorithm>
#include <numeric>

#include "ivmr/error.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr::tree {

double Tree::predict(const Eigen::MatrixXd& x, Eigen::Index row) const {
  int k = 0;
  for (;;) {
    const Node& nd = nodes_[static_cast<std::size_t>(k)];
    if (nd.feature < 0) return nd.value;
    k = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
}

std::vector<std::vector<std::uint32_t>> presort(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::uint32_t>(x.rows());
  std::vector<std::vector<std::uint32_t>> order(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
  }
  return order;
}

namespace {

class Grower {
 public:
  Grower(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& order,
         const std::vector<double>& g, const std::vector<double>& h, const std::vector<std::uint32_t>& count,
         const Params& params, std::uint64_t seed)
      : x_(x), g_(g), h_(h), count_(count), params_(params), rng_(seed), q_(static_cast<int>(x.cols())) {
    lists_.resize(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
      lists_[j].reserve(order[j].size());
      for (std::uint32_t r : order[j])
        if (count_[r] > 0) lists_[j].push_back(r);
    }
    m_ = lists_.empty() ? 0 : lists_[0].size();
    scratch_.resize(m_);
    left_.assign(static_cast<std::size_t>(x.rows()), 0);
    features_.resize(static_cast<std::size_t>(q_));
    std::iota(features_.begin(), features_.end(), 0);
    mtry_ = params.mtry <= 0 ? q_ : std::min(params.mtry, q_);
  }

  Tree run() {
    if (m_ == 0) {
      nodes_.push_back(Node{});
      return Tree(std::move(nodes_));
    }
    build(0, m_, 0);
    return Tree(std::move(nodes_));
  }

 private:
  int build(std::size_t b, std::size_t e, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    double s = 0.0, hh = 0.0, c = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      const std::uint32_t r = lists_[0][k];
      const double w = count_[r];
      s += w * g_[r];
      hh += w * h_[r];
      c += w;
    }
    nodes_[static_cast<std::size_t>(id)].value = hh > 0.0 ? s / hh : 0.0;
    const double min_leaf = params_.min_leaf;
    if (c < 2.0 * min_leaf || (params_.max_depth > 0 && depth >= params_.max_depth) || q_ == 0) return id;

    // Partial Fisher-Yates for the mtry candidate features.
    for (int k = 0; k < mtry_; ++k) {
      const std::size_t pick = static_cast<std::size_t>(k) + rng_.below(static_cast<std::size_t>(q_ - k));
      std::swap(features_[static_cast<std::size_t>(k)], features_[pick]);
    }

    const double parent = hh > 0.0 ? s * s / hh : 0.0;
    double best_gain = parent + 1e-12 * (std::abs(parent) + 1.0);
    int best_f = -1;
    double best_thr = 0.0;
    for (int k = 0; k < mtry_; ++k) {
      const int f = features_[static_cast<std::size_t>(k)];
      const auto& list = lists_[static_cast<std::size_t>(f)];
      double sl = 0.0, hl = 0.0, cl = 0.0;
      for (std::size_t i = b; i + 1 < e; ++i) {
        const std::uint32_t r = list[i];
        const double w = count_[r];
        sl += w * g_[r];
        hl += w * h_[r];
        cl += w;
        const double xv = x_(r, f), xn = x_(list[i + 1], f);
        if (!(xn > xv)) continue;
        if (cl < min_leaf || c - cl < min_leaf) continue;
        const double hr = hh - hl;
        if (!(hl > 0.0) || !(hr > 0.0)) continue;
        const double sr = s - sl;
        const double gain = sl * sl / hl + sr * sr / hr;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          double thr = 0.5 * (xv + xn);
          if (!(thr < xn)) thr = xv;
          best_thr = thr;
        }
      }
    }
    if (best_f < 0) return id;

    const auto& split_list = lists_[static_cast<std::size_t>(best_f)];
    std::size_t nl = 0;
    for (std::size_t i = b; i < e; ++i) {
      const std::uint32_t r = split_list[i];
      const bool l = x_(r, best_f) <= best_thr;
      left_[r] = l;
      nl += l;
    }
    for (auto& list : lists_) {
      std::size_t li = b, ri = 0;
      for (std::size_t i = b; i < e; ++i) {
        const std::uint32_t r = list[i];
        if (left_[r])
          list[li++] = r;
        else
          scratch_[ri++] = r;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri), list.begin() + static_cast<std::ptrdiff_t>(li));
    }
    const std::size_t mid = b + nl;
    const int l = build(b, mid, depth + 1);
    const int r = build(mid, e, depth + 1);
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    nd.feature = best_f;
    nd.threshold = best_thr;
    nd.left = l;
    nd.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  const std::vector<std::uint32_t>& count_;
  Params params_;
  Rng rng_;
  int q_;
  int mtry_ = 0;
  std::size_t m_ = 0;
  std::vector<std::vector<std::uint32_t>> lists_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::uint8_t> left_;
  std::vector<int> features_;
  std::vector<Node> nodes_;
};

}  // namespace

Tree grow(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& order,
          const std::vector<double>& g, const std::vector<double>& h, const std::vector<std::uint32_t>& count,
          const Params& params, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (g.size() != n || h.size() != n || count.size() != n || order.size() != static_cast<std::size_t>(x.cols()))
    throw Error(ErrorCode::InvalidArgument, "tree inputs disagree in size");
  return Grower(x, order, g, h, count, params, seed).run();
}

}  // namespace ivmr::tree
