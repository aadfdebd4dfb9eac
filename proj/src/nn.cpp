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

#include "fac/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace fac::nn {

using nlohmann::json;

std::size_t ParameterStore::add(const std::string& name, Matrix init) {
  if (by_name_.contains(name)) throw Error("duplicate parameter '" + name + "'");
  by_name_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::size_t ParameterStore::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

bool ParameterStore::all_finite() const {
  for (const auto& m : values_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

std::string ParameterStore::hash() const {
  Fnv1a h;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    h.update(names_[i]);
    h.update(values_[i]);
  }
  return h.hex();
}

std::vector<Matrix> ParameterStore::zeros_like() const {
  std::vector<Matrix> out;
  out.reserve(values_.size());
  for (const auto& m : values_) out.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

Tape::Tape(const ParameterStore& params, bool record)
    : params_(params), record_(record), param_nodes_(params.size(), -1) {
  nodes_.reserve(256);
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.ref != nullptr ? *n.ref : n.value;
}

Var Tape::param(std::size_t index) {
  if (index >= params_.size()) throw Error("parameter index out of range");
  if (param_nodes_[index] >= 0) return Var{param_nodes_[index]};
  Node n{Op::kParam, Matrix(), &params_.at(index)};
  n.param = index;
  Var v = push(std::move(n));
  param_nodes_[index] = v.id;
  return v;
}

Var Tape::constant(Matrix m) {
  Node n{Op::kConst, std::move(m)};
  return push(std::move(n));
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw Error("matmul: inner dimensions differ");
  Node n{Op::kMatMul, A * B};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw Error("matmul_nt: inner dimensions differ");
  Node n{Op::kMatMulNT, A * B.transpose()};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Node n{Op::kAdd, value(a) + value(b)};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != A.cols()) throw Error("add_row: bias shape mismatch");
  Node n{Op::kAddRow, A.rowwise() + r.row(0)};
  n.a = a.id;
  n.b = row.id;
  return push(std::move(n));
}

Var Tape::add_const(Var a, const Matrix& c) {
  check_same_shape(value(a), c, "add_const");
  Node n{Op::kAddConst, value(a) + c};
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::mul_const(Var a, const Matrix& c) {
  check_same_shape(value(a), c, "mul_const");
  Node n{Op::kMulConst, value(a).cwiseProduct(c)};
  n.a = a.id;
  n.aux = c;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Matrix& A = value(a);
  if (A.size() == 0) throw Error("mean of an empty matrix");
  Node n{Op::kMean, Matrix::Constant(1, 1, A.mean())};
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n{Op::kScale, value(a) * s};
  n.a = a.id;
  n.s = s;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n{Op::kRelu, value(a).cwiseMax(0.0)};
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n{Op::kTanh, value(a).array().tanh().matrix()};
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
  const Matrix& A = value(a);
  Matrix out(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double mx = A.row(r).maxCoeff();
    out.row(r) = (A.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  Node n{Op::kSoftmax, std::move(out)};
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: nothing to concatenate");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error("concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  Node n{Op::kConcat, Matrix()};
  for (Var p : parts) {
    const Matrix& v = value(p);
    out.middleCols(c, v.cols()) = v;
    c += v.cols();
    n.many.push_back(p.id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::l1_loss(Var pred, const Matrix& target) {
  const Matrix& P = value(pred);
  check_same_shape(P, target, "l1_loss");
  const Matrix diff = P - target;
  Node n{Op::kL1, Matrix::Constant(1, 1, diff.cwiseAbs().mean())};
  n.a = pred.id;
  n.aux = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }) /
          static_cast<double>(diff.size());
  return push(std::move(n));
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::bce_with_logits(Var logits, const Matrix& targets, double pos_weight) {
  const Matrix& Z = value(logits);
  check_same_shape(Z, targets, "bce_with_logits");
  const auto count = static_cast<double>(Z.size());
  double total = 0.0;
  Matrix g(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.size(); ++i) {
    const double z = Z(i);
    const double y = targets(i);
    total += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    const double s = sigmoid(z);
    g(i) = (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / count;
  }
  Node n{Op::kBce, Matrix::Constant(1, 1, total / count)};
  n.a = logits.id;
  n.aux = std::move(g);
  return push(std::move(n));
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& labels) {
  const Matrix& Z = value(logits);
  if (static_cast<std::size_t>(Z.rows()) != labels.size()) {
    throw Error("cross_entropy: one label per row required");
  }
  Matrix probs(Z.rows(), Z.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= Z.cols()) throw Error("cross_entropy: label out of range");
    const double mx = Z.row(r).maxCoeff();
    const double lse = mx + std::log((Z.row(r).array() - mx).exp().sum());
    probs.row(r) = (Z.row(r).array() - lse).exp().matrix();
    total += lse - Z(r, label);
    probs(r, label) -= 1.0;
  }
  const auto rows = static_cast<double>(Z.rows());
  Node n{Op::kCrossEntropy, Matrix::Constant(1, 1, total / rows)};
  n.a = logits.id;
  n.aux = probs / rows;
  return push(std::move(n));
}

Matrix& Tape::grad_of(std::vector<Matrix>& g, int id) {
  Matrix& m = g[static_cast<std::size_t>(id)];
  if (m.size() == 0) {
    const Matrix& v = value(Var{id});
    m = Matrix::Zero(v.rows(), v.cols());
  }
  return m;
}

void Tape::backward(Var loss, std::vector<Matrix>& grads) {
  if (!record_) throw Error("backward on a tape built without recording");
  if (value(loss).size() != 1) throw Error("backward: loss must be a scalar");
  if (grads.size() != params_.size()) throw Error("backward: gradient buffer size mismatch");

  std::vector<Matrix> g(nodes_.size());
  g[static_cast<std::size_t>(loss.id)] = Matrix::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    const Matrix& dC = g[static_cast<std::size_t>(id)];
    if (dC.size() == 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case Op::kParam:
        grads[n.param] += dC;
        break;
      case Op::kConst:
        break;
      case Op::kMatMul:
        grad_of(g, n.a).noalias() += dC * value(Var{n.b}).transpose();
        grad_of(g, n.b).noalias() += value(Var{n.a}).transpose() * dC;
        break;
      case Op::kMatMulNT:
        grad_of(g, n.a).noalias() += dC * value(Var{n.b});
        grad_of(g, n.b).noalias() += dC.transpose() * value(Var{n.a});
        break;
      case Op::kAdd:
        grad_of(g, n.a) += dC;
        grad_of(g, n.b) += dC;
        break;
      case Op::kAddRow:
        grad_of(g, n.a) += dC;
        grad_of(g, n.b) += dC.colwise().sum();
        break;
      case Op::kAddConst:
        grad_of(g, n.a) += dC;
        break;
      case Op::kMulConst:
        grad_of(g, n.a) += dC.cwiseProduct(n.aux);
        break;
      case Op::kScale:
        grad_of(g, n.a) += n.s * dC;
        break;
      case Op::kMean: {
        Matrix& dA = grad_of(g, n.a);
        dA.array() += dC(0, 0) / static_cast<double>(dA.size());
        break;
      }
      case Op::kRelu:
        grad_of(g, n.a).array() += dC.array() * (n.value.array() > 0.0).cast<double>();
        break;
      case Op::kTanh:
        grad_of(g, n.a).array() += dC.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSoftmax: {
        Matrix& dA = grad_of(g, n.a);
        for (Eigen::Index r = 0; r < dC.rows(); ++r) {
          const double dot = dC.row(r).dot(n.value.row(r));
          dA.row(r).array() += n.value.row(r).array() * (dC.row(r).array() - dot);
        }
        break;
      }
      case Op::kConcat: {
        Eigen::Index c = 0;
        for (int part : n.many) {
          Matrix& dP = grad_of(g, part);
          dP += dC.middleCols(c, dP.cols());
          c += dP.cols();
        }
        break;
      }
      case Op::kL1:
      case Op::kBce:
      case Op::kCrossEntropy:
        grad_of(g, n.a) += dC(0, 0) * n.aux;
        break;
    }
    // Free intermediate gradients as soon as they have been propagated.
    g[static_cast<std::size_t>(id)] = Matrix();
  }
}

double AdamConfig::rate_at(int step, int total_steps) const {
  if (total_steps <= 1 || final_lr_fraction == 1.0) return learning_rate;
  const double progress = std::min(1.0, static_cast<double>(step) / (total_steps - 1));
  const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return learning_rate * (final_lr_fraction + (1.0 - final_lr_fraction) * w);
}

Adam::Adam(const ParameterStore& params, AdamConfig cfg)
    : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

double Adam::step(ParameterStore& params, std::vector<Matrix>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix g = grads[i] * clip;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    params.at(i).array() -= cfg_.learning_rate * (m_[i].array() / bc1) /
                            ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
  return norm;
}

namespace {

constexpr char kMagic[8] = {'F', 'A', 'C', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const json& meta) {
  json header = {{"format", "fac-checkpoint"}, {"version", 1}, {"meta", meta}};
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = params.at(i);
    tensors.push_back({{"name", params.name(i)}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * 8;
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = params.at(i);
    // Row-major on disk regardless of Eigen's storage order.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::uint64_t bits;
        const double v = m(r, c);
        std::memcpy(&bits, &v, sizeof bits);
        put_u64(out, bits);
      }
    }
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoError(path.string() + ": not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (16 + header_len > bytes.size()) throw IoError(path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", json::object());
  const std::size_t data_start = 16 + header_len;
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("shape")[0].get<Eigen::Index>();
    const auto cols = t.at("shape")[1].get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    if (data_start + offset + static_cast<std::uint64_t>(rows * cols) * 8 > bytes.size()) {
      throw IoError(path.string() + ": truncated tensor data");
    }
    Matrix m(rows, cols);
    const unsigned char* p = bytes.data() + data_start + offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const std::uint64_t bits = get_u64(p);
        std::memcpy(&m(r, c), &bits, sizeof bits);
        p += 8;
      }
    }
    ckpt.params.add(t.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

json to_json(const TransferReport& report) {
  json out = json::array();
  for (const auto& e : report) out.push_back({{"name", e.name}, {"action", e.action}});
  return out;
}

TransferReport transfer_parameters(ParameterStore& dst, const ParameterStore& src) {
  TransferReport report;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::string& name = dst.name(i);
    if (!src.contains(name)) {
      report.push_back({name, "skipped_missing"});
      continue;
    }
    const Matrix& from = src.at(name);
    Matrix& to = dst.at(i);
    if (from.rows() != to.rows() || from.cols() != to.cols()) {
      report.push_back({name, "skipped_shape"});
      continue;
    }
    to = from;
    report.push_back({name, "copied"});
  }
  return report;
}

}  // namespace fac::nn
