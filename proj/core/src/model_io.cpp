#include "kbsindy/model_io.hpp"

#include "kbsindy/error.hpp"

#include <fstream>
#include <sstream>

namespace kbsindy {

namespace {

using json = nlohmann::ordered_json;

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::schema, std::string("missing field \"") + key + "\"");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, std::string("field \"") + key + "\": " + e.what());
  }
}

json vector_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from(const json& j, const char* key) {
  const auto values = get<std::vector<double>>(j, key);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json kernel_to_json(const KernelSpec& spec) {
  json j;
  if (const auto* g = std::get_if<GaussianKernel>(&spec.family)) {
    j["family"] = "gaussian";
    j["scale"] = g->scale;
    j["width"] = g->width;
  } else {
    const auto& p = std::get<PolySumKernel>(spec.family);
    j["family"] = "poly_sum";
    j["first_order"] = p.first_order;
    j["scales"] = p.scales;
  }
  j["columns"] = spec.columns;
  return j;
}

KernelSpec kernel_from_json(const json& j) {
  const auto family = get<std::string>(j, "family");
  KernelSpec spec;
  if (family == "gaussian") {
    spec.family = GaussianKernel{get<double>(j, "scale"), get<double>(j, "width")};
  } else if (family == "poly_sum") {
    spec.family = PolySumKernel{get<int>(j, "first_order"), get<std::vector<double>>(j, "scales")};
  } else {
    throw Error(ErrorKind::schema, "unknown kernel family \"" + family + "\"");
  }
  if (j.contains("columns")) spec.columns = get<std::vector<int>>(j, "columns");
  spec.validate();
  return spec;
}

json library_to_json(const MonomialLibrary& library) {
  return {{"n", library.n},
          {"order", library.order},
          {"include_constant", library.include_constant},
          {"terms", library.names()}};
}

MonomialLibrary library_from_json(const json& j) {
  const int n = get<int>(j, "n");
  if (n < 1) throw Error(ErrorKind::schema, "library needs n >= 1");
  if (j.contains("terms")) {
    MonomialLibrary lib;
    lib.n = n;
    lib.order = j.contains("order") ? get<int>(j, "order") : 0;
    lib.include_constant = j.contains("include_constant") && get<bool>(j, "include_constant");
    for (const auto& name : get<std::vector<std::string>>(j, "terms")) {
      lib.monomials.push_back(parse_monomial(name, n));
      lib.order = std::max(lib.order, lib.monomials.back().degree());
    }
    return lib;
  }
  return enumerate_monomials(n, get<int>(j, "order"), j.contains("include_constant") && get<bool>(j, "include_constant"));
}

json model_to_json(const ModelEstimate& model) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["library"] = library_to_json(model.library);
  j["xi_parametric"] = vector_json(model.xi_parametric);
  json kernels = json::array();
  for (const auto& k : model.kernel) kernels.push_back(kernel_to_json(k));
  j["kernel"] = kernels;
  json anchors = json::array();
  for (Eigen::Index r = 0; r < model.anchors.rows(); ++r) anchors.push_back(vector_json(model.anchors.row(r).transpose()));
  j["anchor_dim"] = model.anchors.cols();
  j["anchors"] = anchors;
  j["xi_kernel"] = vector_json(model.xi_kernel);
  j["noise_var"] = model.noise_var;
  j["lambda"] = model.lambda;
  j["iterations"] = model.iterations;
  j["converged"] = model.converged;
  j["dof"] = model.dof;
  return j;
}

ModelEstimate model_from_json(const json& j) {
  const int version = get<int>(j, "schema_version");
  if (version != kModelSchemaVersion) {
    throw Error(ErrorKind::schema, "unsupported model schema_version " + std::to_string(version));
  }
  ModelEstimate m;
  m.library = library_from_json(field(j, "library"));
  m.xi_parametric = vector_from(j, "xi_parametric");
  if (static_cast<std::size_t>(m.xi_parametric.size()) != m.library.size()) {
    throw Error(ErrorKind::shape, "xi_parametric length does not match the library");
  }
  for (const auto& k : field(j, "kernel")) m.kernel.push_back(kernel_from_json(k));
  const auto& anchors = field(j, "anchors");
  const Eigen::Index dim = get<Eigen::Index>(j, "anchor_dim");
  m.anchors.resize(static_cast<Eigen::Index>(anchors.size()), dim);
  for (std::size_t r = 0; r < anchors.size(); ++r) {
    const auto row = anchors[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != dim) throw Error(ErrorKind::shape, "anchor row has the wrong length");
    for (Eigen::Index c = 0; c < dim; ++c) m.anchors(static_cast<Eigen::Index>(r), c) = row[c];
  }
  m.xi_kernel = vector_from(j, "xi_kernel");
  if (m.xi_kernel.size() != m.anchors.rows()) throw Error(ErrorKind::shape, "xi_kernel length does not match anchors");
  m.noise_var = get<double>(j, "noise_var");
  m.lambda = get<double>(j, "lambda");
  m.iterations = get<int>(j, "iterations");
  m.converged = get<bool>(j, "converged");
  m.dof = get<double>(j, "dof");
  return m;
}

void save_model(const std::filesystem::path& path, const ModelEstimate& model) { write_json(path, model_to_json(model)); }

ModelEstimate load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace kbsindy
