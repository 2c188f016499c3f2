#include "slmc/io.hpp"

#include <charconv>
#include <stdexcept>

namespace slmc {

namespace {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const Index nr = static_cast<Index>(rows.size());
  const Index nc = nr > 0 ? static_cast<Index>(rows[0].size()) : 0;
  Matrix m(nr, nc);
  for (Index i = 0; i < nr; ++i)
    for (Index j = 0; j < nc; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : os_(path), columns_(header.size()) {
  if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_cells(header);
}

void CsvWriter::write_cells(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::invalid_argument("csv row has " + std::to_string(cells.size()) +
                                " cells, expected " + std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) os_ << ',';
    os_ << cells[i];
  }
  os_ << '\n';
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return json::parse(is);
}

json to_json(const SpectralData& data) {
  return json{{"kind", "spectral"},
              {"n_freq", data.cfg.n_freq},
              {"n_obs", data.cfg.n_obs},
              {"period", data.cfg.period},
              {"noise_std", data.cfg.noise_std},
              {"seed", data.cfg.seed},
              {"true_freq", vector_to_json(data.true_freq)},
              {"observations", vector_to_json(data.observations)}};
}

SpectralData spectral_from_json(const json& j) {
  SpectralData data;
  data.cfg.n_freq = j.at("n_freq").get<int>();
  data.cfg.n_obs = j.at("n_obs").get<int>();
  data.cfg.period = j.at("period").get<double>();
  data.cfg.noise_std = j.at("noise_std").get<double>();
  data.cfg.seed = j.at("seed").get<std::uint64_t>();
  data.true_freq = vector_from_json(j.at("true_freq"));
  data.observations = vector_from_json(j.at("observations"));
  return data;
}

json to_json(const SensorData& data) {
  json pairs = json::array();
  for (const auto& p : data.pairs)
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"observed", p.observed},
                     {"distance", p.distance}});
  return json{{"kind", "sensor"},
              {"n_unknown", data.cfg.n_unknown},
              {"n_known", data.cfg.n_known},
              {"radius", data.cfg.radius},
              {"noise_std", data.cfg.noise_std},
              {"side", data.cfg.side},
              {"seed", data.cfg.seed},
              {"unknown_true", matrix_to_json(data.unknown_true)},
              {"known", matrix_to_json(data.known)},
              {"pairs", std::move(pairs)}};
}

SensorData sensor_from_json(const json& j) {
  SensorData data;
  data.cfg.n_unknown = j.at("n_unknown").get<int>();
  data.cfg.n_known = j.at("n_known").get<int>();
  data.cfg.radius = j.at("radius").get<double>();
  data.cfg.noise_std = j.at("noise_std").get<double>();
  data.cfg.side = j.at("side").get<double>();
  data.cfg.seed = j.at("seed").get<std::uint64_t>();
  data.unknown_true = matrix_from_json(j.at("unknown_true"));
  data.known = matrix_from_json(j.at("known"));
  for (const auto& p : j.at("pairs")) {
    SensorPair pair;
    pair.a = p.at("a").get<int>();
    pair.b = p.at("b").get<int>();
    pair.observed = p.at("observed").get<bool>();
    pair.distance = p.at("distance").get<double>();
    data.pairs.push_back(pair);
  }
  return data;
}

json to_json(const IcgData& data) {
  return json{{"kind", "icg"},
              {"dim", data.dim},
              {"seed", data.seed},
              {"eigenvalues", vector_to_json(data.eigenvalues)},
              {"basis", matrix_to_json(data.basis)}};
}

IcgData icg_from_json(const json& j) {
  IcgData data;
  data.dim = j.at("dim").get<Index>();
  data.seed = j.at("seed").get<std::uint64_t>();
  data.eigenvalues = vector_from_json(j.at("eigenvalues"));
  data.basis = matrix_from_json(j.at("basis"));
  return data;
}

}  // namespace slmc
