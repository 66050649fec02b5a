#include "advml/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace advml {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::string activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Relu:
      return "relu";
    case ActivationKind::Sigmoid:
      return "sigmoid";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::Identity:
      return "identity";
  }
  return "relu";
}

ActivationKind activation_from_name(const std::string& name) {
  if (name == "relu") return ActivationKind::Relu;
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "identity") return ActivationKind::Identity;
  throw std::runtime_error("unknown activation: " + name);
}

std::string checkpoint_to_json(const MlpModel& model) {
  json doc;
  doc["format"] = "advml-mlp-v1";
  doc["activation"] = activation_name(model.hidden_activation);
  doc["output_activation"] = activation_name(model.output_activation);
  doc["layers"] = json::array();
  for (const DenseLayer& layer : model.layers) {
    json jl;
    jl["rows"] = layer.w.rows();
    jl["cols"] = layer.w.cols();
    jl["w"] = layer.w.data();
    jl["b"] = layer.b.data();
    doc["layers"].push_back(std::move(jl));
  }
  return doc.dump();
}

MlpModel checkpoint_from_json(const std::string& text) {
  json doc = json::parse(text);  // throws on malformed input
  if (!doc.contains("format") || doc["format"] != "advml-mlp-v1")
    throw std::runtime_error("checkpoint: unsupported format");

  MlpModel model;
  model.hidden_activation = activation_from_name(doc.at("activation").get<std::string>());
  if (doc.contains("output_activation"))
    model.output_activation = activation_from_name(doc["output_activation"].get<std::string>());

  for (const json& jl : doc.at("layers")) {
    const auto rows = jl.at("rows").get<std::size_t>();
    const auto cols = jl.at("cols").get<std::size_t>();
    const auto w = jl.at("w").get<std::vector<double>>();
    const auto b = jl.at("b").get<std::vector<double>>();
    if (w.size() != rows * cols || b.size() != rows)
      throw std::runtime_error("checkpoint: layer size mismatch");
    DenseLayer layer{Matrix(rows, cols), Matrix(1, rows)};
    layer.w.data() = w;
    layer.b.data() = b;
    model.layers.push_back(std::move(layer));
  }
  if (model.layers.empty()) throw std::runtime_error("checkpoint: no layers");
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l)
    if (model.layers[l].w.rows() != model.layers[l + 1].w.cols())
      throw std::runtime_error("checkpoint: layer dims do not chain");
  return model;
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  spit(path, checkpoint_to_json(model));
}

MlpModel load_checkpoint(const std::string& path) { return checkpoint_from_json(slurp(path)); }

std::string dataset_to_json(const Dataset& data) {
  json doc;
  doc["format"] = "advml-data-v1";
  doc["n"] = data.size();
  doc["d"] = data.dim();
  doc["num_classes"] = data.num_classes;
  if (data.grid)
    doc["grid"] = json::array({data.grid->height, data.grid->width});
  else
    doc["grid"] = nullptr;
  doc["features"] = data.features.data();
  doc["labels"] = data.labels;
  json flags = json::array();
  for (RowFlag f : data.flags) flags.push_back(row_flag_name(f));
  doc["flags"] = std::move(flags);
  return doc.dump();
}

Dataset dataset_from_json(const std::string& text) {
  json doc = json::parse(text);
  if (!doc.contains("format") || doc["format"] != "advml-data-v1")
    throw std::runtime_error("dataset: unsupported format");

  Dataset data;
  const auto n = doc.at("n").get<std::size_t>();
  const auto d = doc.at("d").get<std::size_t>();
  data.num_classes = doc.at("num_classes").get<int>();
  if (!doc.at("grid").is_null()) {
    const auto grid = doc["grid"].get<std::vector<std::size_t>>();
    if (grid.size() != 2) throw std::runtime_error("dataset: bad grid");
    data.grid = GridShape{grid[0], grid[1]};
    if (data.grid->height * data.grid->width != d)
      throw std::runtime_error("dataset: grid does not match feature dim");
  }
  const auto features = doc.at("features").get<std::vector<double>>();
  if (features.size() != n * d) throw std::runtime_error("dataset: feature count mismatch");
  data.features = Matrix(n, d);
  data.features.data() = features;
  data.labels = doc.at("labels").get<std::vector<int>>();
  if (data.labels.size() != n) throw std::runtime_error("dataset: label count mismatch");
  for (int y : data.labels)
    if (y < 0 || y >= data.num_classes) throw std::runtime_error("dataset: label out of range");
  for (const json& f : doc.at("flags")) data.flags.push_back(row_flag_from_name(f.get<std::string>()));
  if (data.flags.size() != n) throw std::runtime_error("dataset: flag count mismatch");
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  spit(path, dataset_to_json(data));
}

Dataset load_dataset(const std::string& path) { return dataset_from_json(slurp(path)); }

void write_pgm(const Matrix& image_row, const GridShape& grid, const std::string& path) {
  if (image_row.rows() != 1 || image_row.cols() != grid.height * grid.width)
    throw std::invalid_argument("write_pgm: row does not match grid shape");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  for (double v : image_row.data()) {
    const double scaled = std::round(255.0 * std::clamp(v, 0.0, 1.0));
    out.put(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace advml
