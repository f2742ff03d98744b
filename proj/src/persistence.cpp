#include "gpcde/persistence.hpp"

#include "gpcde/config.hpp"
#include "gpcde/error.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gpcde {

static_assert(std::endian::native == std::endian::little, "model files are written in host byte order");

namespace {

constexpr char kMagic[5] = {'G', 'P', 'C', 'D', 'E'};
const std::string kParamPrefix = "param/";

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_array(const std::string& name, const Matrix& m) {
    put_string(name);
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    buf_.append(reinterpret_cast<const char*>(m.data()), static_cast<size_t>(m.size()) * sizeof(double));
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, size_t pos) : b_(bytes), pos_(pos) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix get_matrix() {
    const auto rows = get<std::uint64_t>();
    const auto cols = get<std::uint64_t>();
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw FormatError("model file: implausible array shape");
    const size_t bytes = static_cast<size_t>(rows * cols) * sizeof(double);
    need(bytes);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::memcpy(m.data(), b_.data() + pos_, bytes);
    pos_ += bytes;
    return m;
  }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  void need(size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("model file is truncated");
  }
  const std::string& b_;
  size_t pos_;
};

Matrix as_row(const Vector& v) { return v.transpose(); }

Vector as_vector(const Matrix& m) {
  if (m.rows() > 1) throw FormatError("model file: statistics must be stored as a row");
  return m.transpose();
}

}  // namespace

Standardizer identity_standardizer(Eigen::Index dx, Eigen::Index dy) {
  Standardizer s;
  s.x.mean = Vector::Zero(dx);
  s.x.std = Vector::Ones(dx);
  s.y.mean = Vector::Zero(dy);
  s.y.std = Vector::Ones(dy);
  return s;
}

std::string serialize_model(const SavedModel& saved) {
  const GpCdeModel& model = saved.trained.model;
  Writer body;
  body.put_string(model_config_to_json(model.config));
  nlohmann::json columns;
  columns["inputs"] = saved.columns.inputs;
  columns["outputs"] = saved.columns.outputs;
  columns["periodic"] = nlohmann::json::array();
  for (const auto& [name, period] : saved.columns.periodic) columns["periodic"].push_back({name, period});
  body.put_string(columns.dump());
  body.put<std::uint64_t>(static_cast<std::uint64_t>(model.num_data));

  const std::vector<std::string> params = model.params.names();
  body.put<std::uint32_t>(static_cast<std::uint32_t>(params.size() + 5));
  for (const auto& name : params) body.put_array(kParamPrefix + name, model.params.raw(name));
  Matrix curve(static_cast<Eigen::Index>(saved.trained.curve.size()), 3);
  for (size_t i = 0; i < saved.trained.curve.size(); ++i) {
    const CurvePoint& p = saved.trained.curve[i];
    curve.row(static_cast<Eigen::Index>(i)) << static_cast<double>(p.iteration), p.elbo, p.wall_ms;
  }
  body.put_array("curve", curve);
  body.put_array("std/x_mean", as_row(saved.standardizer.x.mean));
  body.put_array("std/x_std", as_row(saved.standardizer.x.std));
  body.put_array("std/y_mean", as_row(saved.standardizer.y.mean));
  body.put_array("std/y_std", as_row(saved.standardizer.y.std));

  const std::string& payload = body.bytes();
  Writer head;
  for (char c : kMagic) head.put<char>(c);
  head.put<std::uint32_t>(kModelFormatVersion);
  head.put<std::uint32_t>(static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()))));
  return head.bytes() + payload;
}

SavedModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  Reader head(bytes, sizeof(kMagic));
  const auto version = head.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw VersionError("model file version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  }
  const auto stored_crc = head.get<std::uint32_t>();
  const size_t body_start = sizeof(kMagic) + 2 * sizeof(std::uint32_t);
  const auto crc = static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + body_start),
                                                    static_cast<uInt>(bytes.size() - body_start)));
  if (crc != stored_crc) throw ChecksumError("model file checksum mismatch");

  Reader r(bytes, body_start);
  SavedModel saved;
  ModelConfig config;
  try {
    config = model_config_from_json(r.get_string());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  try {
    const auto columns = nlohmann::json::parse(r.get_string());
    saved.columns.inputs = columns.at("inputs").get<std::vector<std::string>>();
    saved.columns.outputs = columns.at("outputs").get<std::vector<std::string>>();
    for (const auto& p : columns.at("periodic")) {
      saved.columns.periodic.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatError("model file: malformed column spec");
  }
  const auto num_data = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  std::map<std::string, Matrix> arrays;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    Matrix m = r.get_matrix();
    if (!arrays.emplace(std::move(name), std::move(m)).second) throw FormatError("model file: duplicate array");
  }
  if (!r.at_end()) throw FormatError("model file has trailing bytes");

  // Lay out the registry for this configuration, then overwrite every value.
  Rng unused(0);
  KernelSpec k;
  k.family = config.kernel;
  k.lengthscales = Vector::Ones(config.gp_input_dim());
  GpCdeModel model =
      make_model(config, num_data, Matrix::Zero(config.num_inducing, config.gp_input_dim()), k, unused);
  for (const auto& name : model.params.names()) {
    const auto it = arrays.find(kParamPrefix + name);
    if (it == arrays.end()) throw FormatError("model file is missing parameter '" + name + "'");
    const Matrix& expected = model.params.raw(name);
    if (it->second.rows() != expected.rows() || it->second.cols() != expected.cols()) {
      throw FormatError("model file: parameter '" + name + "' has the wrong shape");
    }
    model.params.set_raw(name, it->second);
    arrays.erase(it);
  }
  auto take = [&](const std::string& name) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("model file is missing array '" + name + "'");
    Matrix m = std::move(it->second);
    arrays.erase(it);
    return m;
  };
  const Matrix curve = take("curve");
  if (curve.cols() != 3 && curve.size() > 0) throw FormatError("model file: curve must have 3 columns");
  for (Eigen::Index i = 0; i < curve.rows(); ++i) {
    saved.trained.curve.push_back({static_cast<long>(curve(i, 0)), curve(i, 1), curve(i, 2)});
  }
  saved.standardizer.x.mean = as_vector(take("std/x_mean"));
  saved.standardizer.x.std = as_vector(take("std/x_std"));
  saved.standardizer.y.mean = as_vector(take("std/y_mean"));
  saved.standardizer.y.std = as_vector(take("std/y_std"));
  if (!arrays.empty()) throw FormatError("model file has unknown array '" + arrays.begin()->first + "'");
  saved.trained.model = std::move(model);
  return saved;
}

void save_model(const std::string& path, const SavedModel& model) { write_file_atomic(path, serialize_model(model)); }

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace gpcde
