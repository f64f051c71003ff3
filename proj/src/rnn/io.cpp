// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/io.hpp"

#include <cmath>
#include <string>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::rnn {

namespace {

const std::vector<double>& meta(const nn::WeightSet& w, const char* name, std::size_t min_size) {
  if (!w.contains(name)) throw FormatError(FormatErrorKind::kBadValue, std::string("missing ") + name);
  const auto* a = std::get_if<nn::F64Array>(&w.get(name));
  if (!a) throw FormatError(FormatErrorKind::kBadValue, std::string(name) + " is not an f64 array");
  if (a->values.size() < min_size) throw FormatError(FormatErrorKind::kSizeMismatch, std::string(name) + " too short");
  return a->values;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
    throw FormatError(FormatErrorKind::kBadValue, std::string("invalid ") + what);
  }
  return static_cast<std::size_t>(v);
}

int as_int(double v, const char* what) {
  if (v != std::floor(v) || std::abs(v) > 1e6) throw FormatError(FormatErrorKind::kBadValue, std::string("invalid ") + what);
  return static_cast<int>(v);
}

nn::F64Array array(std::vector<double> v) {
  nn::F64Array a;
  a.shape = {v.size()};
  a.values = std::move(v);
  return a;
}

}  // namespace

nn::WeightSet to_weight_set(const RnnBundle& b) {
  b.model.check_shapes();
  b.cwt.validate();
  if (b.cwt.frequencies.size() != b.model.config.freq_count) {
    throw InvalidArgument("CWT grid has " + std::to_string(b.cwt.frequencies.size()) + " frequencies, model expects " +
                          std::to_string(b.model.config.freq_count));
  }
  nn::WeightSet w;
  auto model = b.model;
  for (const auto& p : model.parameters()) w.add(std::string("rnn.") + p.name, *p.tensor);
  const auto& c = b.model.config;
  w.add("meta.rnn", array({static_cast<double>(c.freq_count), static_cast<double>(c.hidden),
                           static_cast<double>(c.classes), c.dropout, c.leaky_slope}));
  std::vector<double> cw;
  if (const auto* s = std::get_if<cwt::FixedSigma>(&b.cwt.sigma)) {
    cw = {0.0, s->seconds, b.cwt.truncation};
  } else {
    cw = {1.0, std::get<cwt::FixedCycles>(b.cwt.sigma).cycles, b.cwt.truncation};
  }
  w.add("meta.cwt", array(cw));
  w.add("meta.cwt_freqs", array(b.cwt.frequencies));
  std::vector<double> task = {b.task.task == Task::kSnr ? 1.0 : 0.0, b.task.binning == SnrBinning::kPool ? 1.0 : 0.0};
  for (int l : b.task.snr_levels) task.push_back(l);
  w.add("meta.task", array(task));
  return w;
}

RnnBundle from_weight_set(const nn::WeightSet& w) {
  RnnBundle b;
  const auto& r = meta(w, "meta.rnn", 5);
  RnnConfig c;
  c.freq_count = as_count(r[0], "frequency count");
  c.hidden = as_count(r[1], "hidden width");
  c.classes = as_count(r[2], "class count");
  c.dropout = static_cast<float>(r[3]);
  c.leaky_slope = static_cast<float>(r[4]);
  try {
    b.model = RnnModel::zeros(c);
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatErrorKind::kBadValue, e.what());
  }
  for (const auto& p : b.model.parameters()) {
    const std::string name = std::string("rnn.") + p.name;
    if (!w.contains(name)) throw FormatError(FormatErrorKind::kBadValue, "missing " + name);
    const auto* t = std::get_if<nn::Tensor>(&w.get(name));
    if (!t) throw FormatError(FormatErrorKind::kBadValue, name + " is not a float tensor");
    if (t->shape() != p.tensor->shape()) {
      throw FormatError(FormatErrorKind::kSizeMismatch,
                        name + " has shape " + t->shape_string() + ", expected " + p.tensor->shape_string());
    }
    *p.tensor = *t;
  }

  const auto& cw = meta(w, "meta.cwt", 3);
  if (cw[0] == 0.0) {
    b.cwt.sigma = cwt::FixedSigma{cw[1]};
  } else if (cw[0] == 1.0) {
    b.cwt.sigma = cwt::FixedCycles{cw[1]};
  } else {
    throw FormatError(FormatErrorKind::kBadValue, "unknown sigma mode");
  }
  b.cwt.truncation = cw[2];
  b.cwt.frequencies = meta(w, "meta.cwt_freqs", 1);
  try {
    b.cwt.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatErrorKind::kBadValue, e.what());
  }
  if (b.cwt.frequencies.size() != c.freq_count) {
    throw FormatError(FormatErrorKind::kSizeMismatch, "frequency grid does not match the model input width");
  }

  const auto& t = meta(w, "meta.task", 2);
  if ((t[0] != 0.0 && t[0] != 1.0) || (t[1] != 0.0 && t[1] != 1.0)) {
    throw FormatError(FormatErrorKind::kBadValue, "unknown task encoding");
  }
  b.task.task = t[0] == 1.0 ? Task::kSnr : Task::kClass;
  b.task.binning = t[1] == 1.0 ? SnrBinning::kPool : SnrBinning::kSelect;
  for (std::size_t i = 2; i < t.size(); ++i) b.task.snr_levels.push_back(as_int(t[i], "SNR level"));
  if (b.task.task == Task::kSnr && b.task.snr_levels.size() != c.classes) {
    throw FormatError(FormatErrorKind::kSizeMismatch, "SNR level count does not match the class count");
  }
  return b;
}

void save_bundle(const std::filesystem::path& path, const RnnBundle& bundle) {
  nn::save_weights(path, to_weight_set(bundle));
}

RnnBundle load_bundle(const std::filesystem::path& path) { return from_weight_set(nn::load_weights(path)); }

}  // namespace cwtrnn::rnn
