#include "cursor/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cursor::io {

namespace {

template <typename T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw RuntimeError("cannot open " + path.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <typename T>
  void put(T v) {
    v = byteswap_if_needed(v);
    bytes(&v, sizeof(T));
  }
  void put_matrix(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
  }
  void put_vector(const Vector& v) {
    for (double x : v) put<double>(x);
  }
  void finish() {
    out_.flush();
    if (!out_) throw RuntimeError("write failed");
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw RuntimeError("cannot open " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw RuntimeError(path_.string() + ": truncated file");
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return byteswap_if_needed(v);
  }
  Matrix get_matrix(std::uint32_t rows, std::uint32_t cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
    return m;
  }
  Vector get_vector(std::uint32_t n) {
    Vector v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  void magic(const char (&expected)[5]) {
    char m[4];
    bytes(m, 4);
    if (std::memcmp(m, expected, 4) != 0) throw RuntimeError(path_.string() + ": bad magic bytes");
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

std::uint32_t to_u32(Eigen::Index v, const char* what) {
  if (v < 0 || v > static_cast<Eigen::Index>(UINT32_MAX)) throw InvalidArgument(std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw RuntimeError("bad number '" + s + "'");
  return v;
}

}  // namespace

void write_dataset_binary(const StimulusResponseDataset& ds, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.bytes("CRSR", 4);
  w.put<std::uint32_t>(kDatasetFormatVersion);
  w.put<std::uint32_t>(to_u32(ds.latent_dim(), "latent dim"));
  w.put<std::uint32_t>(to_u32(ds.response_dim(), "response dim"));
  w.put<std::uint32_t>(to_u32(static_cast<Eigen::Index>(ds.size()), "pair count"));
  w.put_matrix(ds.stimuli());
  w.put_matrix(ds.responses());
  const bool has_prov = !ds.provenance().empty();
  std::uint8_t flags = (ds.has_truth() ? 1 : 0) | (has_prov ? 2 : 0);
  w.put<std::uint8_t>(flags);
  if (ds.has_truth()) {
    const auto& t = *ds.hidden_truth();
    w.put<std::uint32_t>(to_u32(static_cast<Eigen::Index>(t.targets.size()), "target count"));
    for (const auto& target : t.targets) w.put_vector(target.coords());
    for (auto idx : t.target_index) w.put<std::uint32_t>(idx);
    w.put_vector(t.distances);
  }
  if (has_prov) {
    const std::string text = ds.provenance().dump();
    w.put<std::uint32_t>(to_u32(static_cast<Eigen::Index>(text.size()), "provenance length"));
    w.bytes(text.data(), text.size());
  }
  w.finish();
}

StimulusResponseDataset read_dataset_binary(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.magic("CRSR");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetFormatVersion) throw RuntimeError(path.string() + ": unsupported format version");
  const auto dz = r.get<std::uint32_t>();
  const auto de = r.get<std::uint32_t>();
  const auto n = r.get<std::uint32_t>();
  Matrix stimuli = r.get_matrix(n, dz);
  Matrix responses = r.get_matrix(n, de);
  const auto flags = r.get<std::uint8_t>();
  std::optional<HiddenTruth> truth;
  if (flags & 1) {
    HiddenTruth t;
    const auto nt = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < nt; ++k) t.targets.emplace_back(r.get_vector(dz));
    t.target_index.resize(n);
    for (auto& idx : t.target_index) idx = r.get<std::uint32_t>();
    t.distances = r.get_vector(n);
    truth = std::move(t);
  }
  nlohmann::json prov = nlohmann::json::object();
  if (flags & 2) {
    const auto len = r.get<std::uint32_t>();
    std::string text(len, '\0');
    r.bytes(text.data(), len);
    prov = nlohmann::json::parse(text);
  }
  if (!r.at_end()) throw RuntimeError(path.string() + ": trailing bytes");
  return StimulusResponseDataset(std::move(stimuli), std::move(responses), std::move(truth), std::move(prov));
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".json";
  return p;
}

void write_dataset_csv(const StimulusResponseDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  const bool truth = ds.has_truth();
  const bool multi = truth && !ds.hidden_truth()->single_target();
  for (Eigen::Index j = 0; j < ds.latent_dim(); ++j) out << (j ? "," : "") << "stim_" << j;
  for (Eigen::Index j = 0; j < ds.response_dim(); ++j) out << ",resp_" << j;
  if (truth) out << ",true_dist";
  if (multi) out << ",target_idx";
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < ds.latent_dim(); ++j) out << (j ? "," : "") << format_exact(ds.stimuli()(r, j));
    for (Eigen::Index j = 0; j < ds.response_dim(); ++j) out << ',' << format_exact(ds.responses()(r, j));
    if (truth) out << ',' << format_exact(ds.hidden_truth()->distances[r]);
    if (multi) out << ',' << ds.hidden_truth()->target_index[i];
    out << '\n';
  }
  if (!out) throw RuntimeError("write failed: " + path.string());

  nlohmann::json side = {{"format", "cursor-dataset-csv"},
                         {"version", kDatasetFormatVersion},
                         {"latent_dim", ds.latent_dim()},
                         {"response_dim", ds.response_dim()},
                         {"n", ds.size()},
                         {"provenance", ds.provenance()}};
  if (truth) {
    std::vector<std::vector<double>> targets;
    for (const auto& t : ds.hidden_truth()->targets) targets.emplace_back(t.coords().begin(), t.coords().end());
    side["hidden_targets"] = targets;
  }
  write_json(side, sidecar_path(path));
}

StimulusResponseDataset read_dataset_csv(const std::filesystem::path& path) {
  const auto side = read_json(sidecar_path(path));
  const auto dz = side.at("latent_dim").get<Eigen::Index>();
  const auto de = side.at("response_dim").get<Eigen::Index>();
  const auto n = side.at("n").get<Eigen::Index>();
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  const bool truth = side.contains("hidden_targets");
  const Eigen::Index n_targets = truth ? static_cast<Eigen::Index>(side.at("hidden_targets").size()) : 0;
  const Eigen::Index expected_cols = dz + de + (truth ? 1 : 0) + (n_targets > 1 ? 1 : 0);
  if (static_cast<Eigen::Index>(header.size()) != expected_cols) throw RuntimeError(path.string() + ": header does not match sidecar dims");

  Matrix stimuli(n, dz), responses(n, de);
  HiddenTruth t;
  if (truth) {
    for (const auto& target : side.at("hidden_targets")) {
      const auto v = target.get<std::vector<double>>();
      t.targets.emplace_back(Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))));
    }
    t.distances.resize(n);
    t.target_index.assign(static_cast<std::size_t>(n), 0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw RuntimeError(path.string() + ": fewer rows than the sidecar states");
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != expected_cols) throw RuntimeError(path.string() + ": ragged row " + std::to_string(i));
    for (Eigen::Index j = 0; j < dz; ++j) stimuli(i, j) = parse_double(cells[static_cast<std::size_t>(j)]);
    for (Eigen::Index j = 0; j < de; ++j) responses(i, j) = parse_double(cells[static_cast<std::size_t>(dz + j)]);
    if (truth) t.distances[i] = parse_double(cells[static_cast<std::size_t>(dz + de)]);
    if (n_targets > 1) t.target_index[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(std::stoul(cells[static_cast<std::size_t>(dz + de + 1)]));
  }
  std::optional<HiddenTruth> opt;
  if (truth) opt = std::move(t);
  return StimulusResponseDataset(std::move(stimuli), std::move(responses), std::move(opt),
                                 side.value("provenance", nlohmann::json::object()));
}

void write_dataset(const StimulusResponseDataset& ds, const std::filesystem::path& path) {
  if (path.extension() == ".bin") {
    write_dataset_binary(ds, path);
  } else {
    write_dataset_csv(ds, path);
  }
}

StimulusResponseDataset read_dataset(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? read_dataset_binary(path) : read_dataset_csv(path);
}

void write_pca_binary(const PcaModel& m, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.bytes("CRPC", 4);
  w.put<std::uint32_t>(kPcaFormatVersion);
  w.put<std::uint32_t>(to_u32(m.input_dim(), "input dim"));
  w.put<std::uint32_t>(to_u32(m.k(), "component count"));
  w.put_vector(m.mean);
  w.put_matrix(m.components);
  w.put_vector(m.explained_variance);
  w.finish();
}

PcaModel read_pca_binary(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.magic("CRPC");
  if (r.get<std::uint32_t>() != kPcaFormatVersion) throw RuntimeError(path.string() + ": unsupported format version");
  const auto d = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  PcaModel m;
  m.mean = r.get_vector(d);
  m.components = r.get_matrix(k, d);
  m.explained_variance = r.get_vector(k);
  if (!r.at_end()) throw RuntimeError(path.string() + ": trailing bytes");
  return m;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_jsonl(const std::vector<nlohmann::json>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

void write_csv(const Table& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < t.header.size(); ++j) out << (j ? "," : "") << t.header[j];
  out << '\n';
  for (const auto& row : t.rows) {
    for (const auto& cell : row) {
      require(cell.find_first_of(",\"\n") == std::string::npos, "write_csv: cell contains a separator: " + cell);
    }
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split_csv_line(line));
  }
  return t;
}

}  // namespace cursor::io
