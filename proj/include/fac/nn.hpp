// Copyright 2026 The FAC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode differentiation over dense matrices, plus the named
// parameter store, Adam, and the checkpoint file format shared by the
// sequence models.

#ifndef FAC_NN_HPP_
#define FAC_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fac/common.hpp"
#include "json.hpp"

namespace fac::nn {

// Ordered collection of named tensors. Order is insertion order and defines
// the layout of gradient buffers and checkpoints.
class ParameterStore {
 public:
  std::size_t add(const std::string& name, Matrix init);
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.contains(name); }

  const Matrix& at(std::size_t i) const { return values_[i]; }
  Matrix& at(std::size_t i) { return values_[i]; }
  const Matrix& at(const std::string& name) const { return values_[index(name)]; }
  Matrix& at(const std::string& name) { return values_[index(name)]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;
  bool all_finite() const;
  std::string hash() const;

  std::vector<Matrix> zeros_like() const;

  bool operator==(const ParameterStore& other) const {
    return names_ == other.names_ && values_ == other.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, std::size_t> by_name_;
};

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain = 1.0);

// Handle to a tape node.
struct Var {
  int id = -1;
};

class Tape {
 public:
  // With `record` false the tape only evaluates values; backward() is refused.
  explicit Tape(const ParameterStore& params, bool record = true);

  Var param(std::size_t index);
  Var param(const std::string& name) { return param(params_.index(name)); }
  Var constant(Matrix m);

  const Matrix& value(Var v) const;

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // row broadcast over the rows of a
  Var add_const(Var a, const Matrix& c);
  Var mul_const(Var a, const Matrix& c);  // elementwise
  Var scale(Var a, double s);
  Var mean(Var a);  // 1x1
  Var relu(Var a);
  Var tanh(Var a);
  Var softmax_rows(Var a);
  Var concat_cols(const std::vector<Var>& parts);

  // y = x W + b, with W stored (in, out) and b (1, out).
  Var linear(Var x, std::size_t weight, std::size_t bias) {
    return add_row(matmul(x, param(weight)), param(bias));
  }

  // Scalar (1x1) losses, averaged over elements or rows.
  Var l1_loss(Var pred, const Matrix& target);
  Var bce_with_logits(Var logits, const Matrix& targets, double pos_weight = 1.0);
  Var cross_entropy(Var logits, const std::vector<int>& labels);

  // Accumulates d(loss)/d(param) into grads (sized like the store).
  void backward(Var loss, std::vector<Matrix>& grads);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kParam, kConst, kMatMul, kMatMulNT, kAdd, kAddRow, kAddConst, kMulConst, kScale, kMean,
    kRelu, kTanh, kSoftmax, kConcat, kL1, kBce, kCrossEntropy
  };
  struct Node {
    Op op;
    Matrix value;
    const Matrix* ref = nullptr;  // parameter leaves alias the store
    int a = -1;
    int b = -1;
    std::vector<int> many;
    double s = 0.0;
    std::size_t param = 0;
    Matrix aux;
  };

  Var push(Node n);
  Matrix& grad_of(std::vector<Matrix>& g, int id);

  const ParameterStore& params_;
  bool record_;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient norm clip; <= 0 disables
  // Cosine decay from learning_rate to final_lr_fraction * learning_rate over
  // a training run; 1 keeps the rate constant.
  double final_lr_fraction = 1.0;

  double rate_at(int step, int total_steps) const;
  bool operator==(const AdamConfig&) const = default;
};

class Adam {
 public:
  Adam(const ParameterStore& params, AdamConfig cfg);
  // Returns the pre-clip global gradient norm.
  double step(ParameterStore& params, std::vector<Matrix>& grads);
  std::int64_t steps() const { return t_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

// Checkpoint: 8-byte magic "FACCKPT1", u64 header length, JSON header, then
// float64 little-endian tensor data. The header carries free-form metadata
// (architecture config, seed, step count) and the tensor table.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  ParameterStore params;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TransferEntry {
  std::string name;
  std::string action;  // copied | skipped_shape | skipped_missing
};

using TransferReport = std::vector<TransferEntry>;

nlohmann::json to_json(const TransferReport& report);

// Copies every tensor whose name and shape match; everything else keeps its
// current value and is listed as skipped.
TransferReport transfer_parameters(ParameterStore& dst, const ParameterStore& src);

}  // namespace fac::nn

#endif  // FAC_NN_HPP_
