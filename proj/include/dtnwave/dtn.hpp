#pragma once

#include <atomic>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "dtnwave/compact_scheme.hpp"
#include "dtnwave/model.hpp"
#include "dtnwave/transverse.hpp"
#include "dtnwave/types.hpp"

namespace dtnwave {

/// One LU factorization of (L + mu_k / h^2 I) per sine mode k of a segment,
/// shared by the map assembly and every source solve on that structure.
class ModeWorkspace {
 public:
  /// Throws NumericalError when a shifted matrix has condition > 1e12
  /// (transverse resonance with the segment's z-grid).
  ModeWorkspace(CompactScheme<double> scheme, std::shared_ptr<const TransverseOperator> op);

  const CompactScheme<double>& scheme() const { return scheme_; }
  const TransverseOperator& op() const { return *op_; }
  const MatrixXc& L() const { return op_->matrix(); }
  int modes() const { return scheme_.interior(); }
  const Eigen::PartialPivLU<MatrixXc>& factor(int k) const { return factors_[static_cast<std::size_t>(k)]; }
  /// Condition estimate of the k-th shifted matrix, k = 0..q-2.
  double condition(int k) const { return conditions_[static_cast<std::size_t>(k)]; }
  double max_condition() const;

 private:
  CompactScheme<double> scheme_;
  std::shared_ptr<const TransverseOperator> op_;
  std::vector<Eigen::PartialPivLU<MatrixXc>> factors_;
  std::vector<double> conditions_;
};

/// Interior field u(x_i, xi_k), k = 1..q-1 (as columns), of the segment
/// problem with Dirichlet data u_left at xi_0 and u_right at xi_q.
MatrixXc solve_segment_modes(const ModeWorkspace& ws, const VectorXc& u_left,
                             const VectorXc& u_right, const MatrixXc& f_samples);

struct EndpointDerivatives {
  VectorXc left;
  VectorXc right;
};

/// Fourth-order one-sided d/dz at both segment ends, using u'' = f - L u.
/// Requires q >= 3.
EndpointDerivatives endpoint_derivatives(const CompactScheme<double>& scheme,
                                         const MatrixXc& L, const MatrixXc& interior,
                                         const VectorXc& u_left, const VectorXc& u_right,
                                         const MatrixXc& f_samples);

struct DtnBlocks {
  MatrixXc M11, M12, M21, M22;
};

struct SourceVectors {
  VectorXc s1, s2;
};

/// Affine DtN map of a uniform segment:
///   [u_z(z_{j-1}); u_z(z_j)] = [M11 M12; M21 M22] [u(z_{j-1}); u(z_j)] + [s1; s2]
struct DtnMap {
  std::shared_ptr<const DtnBlocks> blocks;
  VectorXc s1, s2;
  std::string key;

  const MatrixXc& M11() const { return blocks->M11; }
  const MatrixXc& M12() const { return blocks->M12; }
  const MatrixXc& M21() const { return blocks->M21; }
  const MatrixXc& M22() const { return blocks->M22; }
};

/// s1, s2: endpoint derivatives of the zero-boundary solution driven by f.
SourceVectors compute_source_vector(const ModeWorkspace& ws, const MatrixXc& f_samples);

/// The four blocks from the solution operator of the mode equations applied to
/// unit boundary data on each side at once.
DtnBlocks compute_dtn_blocks(const ModeWorkspace& ws);

/// Uncached convenience: workspace, blocks and source vectors for one segment.
DtnMap compute_dtn_map(const Segment& segment, std::shared_ptr<const TransverseOperator> op,
                       const MatrixXc& f_samples);

/// Thread-safe memo with at-most-once construction per key. Concurrent
/// requests for a key under construction wait for the same result; a failed
/// construction is remembered and rethrown to every requester.
template <typename Value>
class CoalescingCache {
 public:
  using Ptr = std::shared_ptr<const Value>;

  struct Lookup {
    Ptr value;
    bool built = false;
  };

  Lookup get_or_build(const std::string& key, const std::function<Value()>& build) {
    std::promise<Ptr> promise;
    std::shared_future<Ptr> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (!owner) {
      hits_.fetch_add(1);
      return {future.get(), false};
    }
    try {
      promise.set_value(std::make_shared<const Value>(build()));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    builds_.fetch_add(1);
    return {future.get(), true};
  }

  std::size_t builds() const { return builds_.load(); }
  std::size_t hits() const { return hits_.load(); }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<Ptr>> entries_;
  std::atomic<std::size_t> builds_{0};
  std::atomic<std::size_t> hits_{0};
};

/// Structure-only part of a segment's map: independent of the source term.
struct SegmentStructure {
  std::shared_ptr<const ModeWorkspace> workspace;
  std::shared_ptr<const DtnBlocks> blocks;
};

/// DtN maps keyed by segment structure; source vectors keyed additionally by
/// the source, so sourced and sourceless segments of one structure share M.
class DtnCache {
 public:
  struct Result {
    DtnMap map;
    bool map_built = false;
    bool source_built = false;
    double max_condition = 1.0;
  };

  /// structure_key identifies (operator, length, q); source_key is empty for
  /// sourceless segments.
  Result lookup(const std::string& structure_key, const std::string& source_key,
                const Segment& segment, const std::shared_ptr<const TransverseOperator>& op,
                const std::function<MatrixXc()>& sample);

  std::size_t maps_built() const { return structures_.builds(); }
  std::size_t map_hits() const { return structures_.hits(); }
  std::size_t sources_built() const { return sources_.builds(); }

 private:
  CoalescingCache<SegmentStructure> structures_;
  CoalescingCache<SourceVectors> sources_;
};

std::string structure_key(const TransverseOperator& op, const Segment& segment);

}  // namespace dtnwave
