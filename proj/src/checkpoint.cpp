#include "sahc/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sahc {

namespace {

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& out, double d) {
  write_u64_le(out, std::bit_cast<std::uint64_t>(d));
}

double read_f64_le(std::istream& in) {
  return std::bit_cast<double>(read_u64_le(in));
}

const char* joint_init_name(JointInit mode) {
  return mode == JointInit::kUniform ? "uniform" : "indicator";
}

JointInit joint_init_from_name(const std::string& name) {
  if (name == "uniform") return JointInit::kUniform;
  if (name == "indicator") return JointInit::kIndicator;
  throw std::runtime_error("checkpoint: unknown joint_init '" + name + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  nlohmann::ordered_json header;
  header["format"] = "sahc-checkpoint";
  header["version"] = 1;
  header["hierarchy"] = nlohmann::ordered_json::parse(model.hierarchy().to_json());
  const BackboneConfig& bb = model.backbone_config();
  header["backbone"] = {{"input_dim", bb.input_dim},
                        {"hidden", bb.hidden},
                        {"feature_dim", bb.feature_dim},
                        {"nonlinearity", bb.nonlinearity}};
  header["joint_init"] = joint_init_name(model.joint_init());
  header["seed"] = model.init_seed();

  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.params()) {
    tensors.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * 8;
  }
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("checkpoint: cannot open " + path);
  write_u64_le(file, header_text.size());
  file.write(header_text.data(),
             static_cast<std::streamsize>(header_text.size()));
  for (const auto& p : model.params())
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        write_f64_le(file, p.value(i, j));
  if (!file) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::uint64_t header_len = read_u64_le(file);
  if (header_len == 0 || header_len > (1u << 26))
    throw std::runtime_error("checkpoint: not a checkpoint file");
  std::string header_text(header_len, '\0');
  file.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!file) throw std::runtime_error("checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != "sahc-checkpoint")
    throw std::runtime_error("checkpoint: not a checkpoint file");

  HierarchySpec spec = HierarchySpec::parse(header.at("hierarchy").dump());
  BackboneConfig bb;
  bb.input_dim = header.at("backbone").at("input_dim").get<int>();
  bb.hidden = header.at("backbone").at("hidden").get<std::vector<int>>();
  bb.feature_dim = header.at("backbone").at("feature_dim").get<int>();
  bb.nonlinearity = header.at("backbone").at("nonlinearity").get<std::string>();
  Model model(std::move(spec), std::move(bb),
              joint_init_from_name(header.at("joint_init").get<std::string>()),
              header.at("seed").get<std::uint64_t>());

  const auto& tensors = header.at("tensors");
  if (tensors.size() != static_cast<size_t>(model.params().size()))
    throw std::runtime_error("checkpoint: tensor count mismatch");
  const std::streamoff payload_start =
      static_cast<std::streamoff>(8 + header_len);
  for (const auto& t : tensors) {
    const std::string name = t.at("name").get<std::string>();
    const int ix = model.params().find(name);
    if (ix < 0)
      throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    Eigen::MatrixXd& value = model.params().at(ix).value;
    if (value.rows() != t.at("rows").get<Eigen::Index>() ||
        value.cols() != t.at("cols").get<Eigen::Index>())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    file.seekg(payload_start +
               static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j)
        value(i, j) = read_f64_le(file);
  }
  if (!file) throw std::runtime_error("checkpoint: truncated payload");
  return model;
}

}  // namespace sahc
