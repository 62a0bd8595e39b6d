#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tqn/network.hpp"

namespace tqn {

// Checkpoints are a one-line JSON header (shape, seed, step count) followed by
// the raw parameters as little-endian 64-bit floats in canonical layer order,
// each weight matrix row-major and then its bias vector.
static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native little-endian doubles");

struct Checkpoint {
  QNetworkParams params;
  std::uint64_t seed = 0;
  long step = 0;
};

namespace detail {

inline std::size_t parameter_count(const QNetworkParams& params) {
  std::size_t count = 0;
  for (const DenseLayer& layer : params.layers)
    count += static_cast<std::size_t>(layer.w.size() + layer.b.size());
  return count;
}

inline std::vector<double> flatten_parameters(const QNetworkParams& params) {
  std::vector<double> flat;
  flat.reserve(parameter_count(params));
  for (const DenseLayer& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) flat.push_back(layer.w(r, c));
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) flat.push_back(layer.b(i));
  }
  return flat;
}

inline void unflatten_parameters(QNetworkParams& params, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (DenseLayer& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = flat[k++];
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = flat[k++];
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const QNetworkParams& params,
                            std::uint64_t seed, long step) {
  nlohmann::json header{{"format", "tqn-checkpoint"},
                        {"version", 1},
                        {"input_size", params.config.input_size},
                        {"hidden", params.config.hidden},
                        {"output_size", params.config.output_size},
                        {"dueling", params.config.dueling},
                        {"stream_hidden", params.config.stream_hidden},
                        {"seed", seed},
                        {"step", step},
                        {"param_count", detail::parameter_count(params)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
  out << header.dump() << '\n';
  const std::vector<double> flat = detail::flatten_parameters(params);
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("checkpoint: cannot open: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::invalid_argument("checkpoint: missing header line: " + path.string());
  nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "tqn-checkpoint" ||
      header.value("version", 0) != 1)
    throw std::invalid_argument("checkpoint: unrecognized header: " + path.string());

  Checkpoint checkpoint;
  NetworkConfig config;
  try {
    config.input_size = header.at("input_size").get<int>();
    config.hidden = header.at("hidden").get<std::vector<int>>();
    config.output_size = header.at("output_size").get<int>();
    config.dueling = header.at("dueling").get<bool>();
    config.stream_hidden = header.at("stream_hidden").get<int>();
    checkpoint.seed = header.at("seed").get<std::uint64_t>();
    checkpoint.step = header.at("step").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("checkpoint: malformed header (" + std::string(e.what()) +
                                "): " + path.string());
  }
  checkpoint.params = make_zero_network(config);

  const std::size_t expected = detail::parameter_count(checkpoint.params);
  if (header.value("param_count", std::size_t{0}) != expected)
    throw std::invalid_argument("checkpoint: parameter count does not match shape: " +
                                path.string());
  std::vector<double> flat(expected);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(expected * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(double))
    throw std::invalid_argument("checkpoint: truncated payload: " + path.string());
  if (in.peek() != std::char_traits<char>::eof())
    throw std::invalid_argument("checkpoint: trailing bytes after payload: " + path.string());
  detail::unflatten_parameters(checkpoint.params, flat);
  return checkpoint;
}

}  // namespace tqn
