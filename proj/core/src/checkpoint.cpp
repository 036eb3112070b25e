#include "cep/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "cep/error.hpp"
#include "cep/io.hpp"

namespace cep {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");

constexpr char kModelMagic[4] = {'C', 'E', 'P', 'M'};
constexpr char kScoreMagic[4] = {'C', 'E', 'P', 'S'};

uint64_t fnv1a(std::string_view bytes) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    out_ += s;
  }
  template <typename T>
  void put_array(std::span<const T> values) {
    put<uint64_t>(values.size());
    out_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
  }
  void raw(std::string_view s) { out_ += s; }
  std::string finish() {
    put<uint64_t>(fnv1a(out_));
    return std::move(out_);
  }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const char (&magic)[4], const char* what) : bytes_(bytes) {
    if (bytes_.size() < 4 + sizeof(uint32_t) + sizeof(uint64_t) || std::memcmp(bytes_.data(), magic, 4) != 0) {
      throw FormatError(std::string("not a ") + what + " file");
    }
    const auto body = bytes_.substr(0, bytes_.size() - sizeof(uint64_t));
    uint64_t stored = 0;
    std::memcpy(&stored, bytes_.data() + body.size(), sizeof(stored));
    pos_ = 4;
    const auto version = get<uint32_t>();
    if (version != kCheckpointVersion) {
      throw FormatError(std::string(what) + " version " + std::to_string(version) + " is not supported");
    }
    if (fnv1a(body) != stored) throw FormatError(std::string(what) + " checksum mismatch");
    end_ = body.size();
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto size = get<uint32_t>();
    need(size);
    std::string s(bytes_.substr(pos_, size));
    pos_ += size;
    return s;
  }
  template <typename T>
  std::vector<T> get_array() {
    const auto count = get<uint64_t>();
    if (count > (end_ - pos_) / sizeof(T)) throw FormatError("truncated array");
    std::vector<T> values(count);
    std::memcpy(values.data(), bytes_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return values;
  }
  void expect_end() const {
    if (pos_ != end_) throw FormatError("trailing bytes");
  }

 private:
  void need(size_t size) const {
    if (size > end_ - pos_) throw FormatError("truncated file");
  }

  std::string_view bytes_;
  size_t pos_ = 0;
  size_t end_ = 0;
};

}  // namespace

std::string serialize_model(const ArDensityModel& model) {
  Writer w;
  w.raw(std::string_view(kModelMagic, 4));
  w.put<uint32_t>(kCheckpointVersion);
  const auto& cfg = model.config();
  w.put<int32_t>(cfg.embedding_dim);
  w.put<int32_t>(cfg.hidden_dim);
  w.put<int32_t>(cfg.residual_blocks);
  w.put<int32_t>(cfg.numeric_bins);
  w.put<int32_t>(cfg.batch_size);
  w.put<int32_t>(cfg.epochs);
  w.put<double>(cfg.dropout);
  w.put<double>(cfg.learning_rate);
  w.put<double>(cfg.beta1);
  w.put<double>(cfg.beta2);
  w.put<double>(cfg.epsilon);
  w.put_array<int>(model.order());

  w.put<uint32_t>(static_cast<uint32_t>(model.num_columns()));
  for (const auto& col : model.columns()) {
    w.put_string(col.name);
    w.put<uint8_t>(static_cast<uint8_t>(col.kind));
    w.put_array<int>(col.code_map);
    w.put<int32_t>(col.categories);
    w.put<double>(col.lower);
    w.put<double>(col.upper);
    w.put<int32_t>(col.bins);
    w.put<uint8_t>(col.remap ? 1 : 0);
    if (col.remap) {
      w.put<double>(col.remap->lower);
      w.put<double>(col.remap->upper);
      w.put<double>(col.remap->new_lower);
      std::vector<double> bounds;
      for (const auto& s : col.remap->subranges) {
        bounds.push_back(s.lo);
        bounds.push_back(s.hi);
      }
      w.put_array<double>(bounds);
      w.put_array<double>(col.remap->offsets);
    }
  }
  w.put_array<double>(model.parameters());
  w.put_array<uint8_t>(model.prune_mask());
  return w.finish();
}

ArDensityModel deserialize_model(const std::string& bytes) {
  Reader r(bytes, kModelMagic, "checkpoint");
  ModelConfig cfg;
  cfg.embedding_dim = r.get<int32_t>();
  cfg.hidden_dim = r.get<int32_t>();
  cfg.residual_blocks = r.get<int32_t>();
  cfg.numeric_bins = r.get<int32_t>();
  cfg.batch_size = r.get<int32_t>();
  cfg.epochs = r.get<int32_t>();
  cfg.dropout = r.get<double>();
  cfg.learning_rate = r.get<double>();
  cfg.beta1 = r.get<double>();
  cfg.beta2 = r.get<double>();
  cfg.epsilon = r.get<double>();
  cfg.column_order = r.get_array<int>();

  const auto count = r.get<uint32_t>();
  std::vector<ModelColumn> columns(count);
  for (auto& col : columns) {
    col.name = r.get_string();
    const auto kind = r.get<uint8_t>();
    if (kind > static_cast<uint8_t>(ColumnKind::key)) throw FormatError("unknown column kind");
    col.kind = static_cast<ColumnKind>(kind);
    col.code_map = r.get_array<int>();
    col.categories = r.get<int32_t>();
    col.lower = r.get<double>();
    col.upper = r.get<double>();
    col.bins = r.get<int32_t>();
    if (r.get<uint8_t>() != 0) {
      NumericRemap remap;
      remap.lower = r.get<double>();
      remap.upper = r.get<double>();
      remap.new_lower = r.get<double>();
      const auto bounds = r.get_array<double>();
      if (bounds.size() % 2 != 0) throw FormatError("odd remap bound count");
      for (size_t i = 0; i < bounds.size(); i += 2) remap.subranges.push_back(Interval{bounds[i], bounds[i + 1]});
      remap.offsets = r.get_array<double>();
      col.remap = std::move(remap);
    }
  }
  auto params = r.get_array<double>();
  auto mask = r.get_array<uint8_t>();
  r.expect_end();
  try {
    ArDensityModel model(std::move(columns), cfg);
    model.restore(std::move(params), std::move(mask));
    return model;
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ArDensityModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

ArDensityModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint " + path.string() + " does not exist");
  return deserialize_model(read_file(path));
}

void save_scores(const ScoreFile& scores, const std::filesystem::path& path) {
  Writer w;
  w.raw(std::string_view(kScoreMagic, 4));
  w.put<uint32_t>(kCheckpointVersion);
  w.put<uint64_t>(scores.model_checksum);
  w.put<uint64_t>(scores.batches);
  w.put_array<double>(scores.scores);
  write_file(path, w.finish());
}

ScoreFile load_scores(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("score file " + path.string() + " does not exist");
  const auto bytes = read_file(path);
  Reader r(bytes, kScoreMagic, "score");
  ScoreFile out;
  out.model_checksum = r.get<uint64_t>();
  out.batches = r.get<uint64_t>();
  out.scores = r.get_array<double>();
  r.expect_end();
  return out;
}

}  // namespace cep
