#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bem_assembly.hpp"
#include "cell_solver.hpp"
#include "core.hpp"
#include "deformation_basis.hpp"
#include "geometry_io.hpp"
#include "homogenization.hpp"
#include "optimizer.hpp"
#include "periodic_kernel.hpp"
#include "surface_geometry.hpp"

namespace scaffold {

/// Process exit codes of the command line tool.
enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitOptimization = 2, kExitMissingKernel = 3 };

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::missing_kernel_cache: return kExitMissingKernel;
    case ErrorKind::line_search_failure:
    case ErrorKind::numerical_breakdown:
    case ErrorKind::solver:
    case ErrorKind::assembly: return kExitOptimization;
    default: return kExitInput;
  }
}

struct GeometrySpec {
  std::string generator = "sphere";
  PrimitiveParams params;
  /// geometry file; overrides the generator when set
  std::string file;
};

struct RunConfig {
  GeometrySpec geometry;
  Mat3 target = Mat3::Identity();
  int basis_p = 16;
  double basis_ell = 1.0;
  double basis_tol = 1e-6;
  int bem_degree = 2;
  int bem_level = 3;
  double j_tol = 1e-5;
  int max_iter = 25;
  int kernel_degree = 12;
  std::string kernel_cache = "kernel_coefficients.json";
  std::string output_directory = "out";
  bool output_vtk = true;
  std::string output_csv = "convergence.csv";
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::schema, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(ErrorKind::schema, "unknown key '" + k + "' in " + where);
}

inline Vec3 vec3_from(const nlohmann::json& j, const std::string& what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) fail(ErrorKind::schema, what + " must have three entries");
  return {v[0], v[1], v[2]};
}

inline Mat3 mat3_from(const nlohmann::json& j, const std::string& what) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.size() != 3) fail(ErrorKind::schema, what + " must be 3x3");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    if (rows[i].size() != 3) fail(ErrorKind::schema, what + " must be 3x3");
    for (int k = 0; k < 3; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

inline nlohmann::json mat3_json(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int k = 0; k < 3; ++k) r.push_back(std::stod(fmt12(m(i, k))));
    rows.push_back(r);
  }
  return rows;
}

inline PrimitiveKind primitive_kind(const std::string& name) {
  if (name == "sphere") return PrimitiveKind::sphere;
  if (name == "cube") return PrimitiveKind::cube;
  if (name == "rotated_cube") return PrimitiveKind::rotated_cube;
  if (name == "two_body") return PrimitiveKind::two_body;
  if (name == "drilled_cube_stub") return PrimitiveKind::drilled_cube_stub;
  fail(ErrorKind::schema, "unknown geometry generator '" + name + "'");
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  RunConfig c;
  try {
    detail::check_keys(j, {"geometry", "target", "basis", "bem", "optimizer", "kernel", "output"}, "config");
    auto rel = [&](const std::string& p) {
      if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
      return (std::filesystem::path(base_dir) / p).string();
    };
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      detail::check_keys(g, {"generator", "file", "center", "radius", "half_width", "rotation", "cube_center",
                             "cube_half_width"},
                         "geometry");
      if (g.contains("file")) c.geometry.file = rel(g.at("file").get<std::string>());
      c.geometry.generator = g.value("generator", c.geometry.generator);
      (void)detail::primitive_kind(c.geometry.generator);
      PrimitiveParams& p = c.geometry.params;
      if (g.contains("center")) p.center = detail::vec3_from(g.at("center"), "geometry.center");
      p.radius = g.value("radius", p.radius);
      p.half_width = g.value("half_width", p.half_width);
      if (g.contains("rotation")) {
        const auto& r = g.at("rotation");
        if (r.is_string()) {
          if (r.get<std::string>() != "reference") fail(ErrorKind::schema, "rotation must be a matrix or \"reference\"");
          p.rotation = reference_rotation();
        } else {
          p.rotation = detail::mat3_from(r, "geometry.rotation");
        }
      } else if (c.geometry.generator == "rotated_cube") {
        p.rotation = reference_rotation();
      }
      if (g.contains("cube_center")) p.cube_center = detail::vec3_from(g.at("cube_center"), "geometry.cube_center");
      p.cube_half_width = g.value("cube_half_width", p.cube_half_width);
      if (c.geometry.generator == "two_body" && !g.contains("center")) {
        p.center = Vec3::Constant(-0.25);
        if (!g.contains("radius")) p.radius = 0.15;
      }
    }
    if (j.contains("target")) {
      const auto& t = j.at("target");
      if (t.is_object()) {
        detail::check_keys(t, {"diagonal", "rotation"}, "target");
        const Vec3 d = detail::vec3_from(t.at("diagonal"), "target.diagonal");
        Mat3 rot = Mat3::Identity();
        if (t.contains("rotation")) {
          const auto& r = t.at("rotation");
          rot = r.is_string() && r.get<std::string>() == "reference" ? reference_rotation()
                                                                 : detail::mat3_from(r, "target.rotation");
        }
        c.target = rot * d.asDiagonal() * rot.transpose();
        c.target = 0.5 * (c.target + c.target.transpose()).eval();
      } else {
        c.target = detail::mat3_from(t, "target");
        if ((c.target - c.target.transpose()).cwiseAbs().maxCoeff() > 1e-12)
          fail(ErrorKind::schema, "target tensor is not symmetric");
      }
    }
    if (j.contains("basis")) {
      const auto& b = j.at("basis");
      detail::check_keys(b, {"p", "ell", "tol"}, "basis");
      c.basis_p = b.value("p", c.basis_p);
      c.basis_ell = b.value("ell", c.basis_ell);
      c.basis_tol = b.value("tol", c.basis_tol);
      if (c.basis_p < 1 || !(c.basis_ell > 0.0) || !(c.basis_tol > 0.0))
        fail(ErrorKind::schema, "basis parameters must be positive");
    }
    if (j.contains("bem")) {
      const auto& b = j.at("bem");
      detail::check_keys(b, {"degree", "level"}, "bem");
      c.bem_degree = b.value("degree", c.bem_degree);
      c.bem_level = b.value("level", c.bem_level);
      if (c.bem_degree < 1 || c.bem_level < 0) fail(ErrorKind::schema, "bem degree >= 1 and level >= 0 required");
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      detail::check_keys(o, {"J_tol", "max_iter"}, "optimizer");
      c.j_tol = o.value("J_tol", c.j_tol);
      c.max_iter = o.value("max_iter", c.max_iter);
      if (!(c.j_tol > 0.0) || c.max_iter < 1) fail(ErrorKind::schema, "J_tol > 0 and max_iter >= 1 required");
    }
    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      detail::check_keys(k, {"N", "cache"}, "kernel");
      c.kernel_degree = k.value("N", c.kernel_degree);
      if (k.contains("cache")) c.kernel_cache = rel(k.at("cache").get<std::string>());
    } else {
      c.kernel_cache = rel(c.kernel_cache);
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      detail::check_keys(o, {"directory", "vtk", "csv"}, "output");
      c.output_directory = o.value("directory", c.output_directory);
      c.output_vtk = o.value("vtk", c.output_vtk);
      c.output_csv = o.value("csv", c.output_csv);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig read_run_config(const std::string& path) {
  return run_config_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json g;
  if (!c.geometry.file.empty()) {
    g["file"] = c.geometry.file;
  } else {
    const PrimitiveParams& p = c.geometry.params;
    g["generator"] = c.geometry.generator;
    g["center"] = {p.center[0], p.center[1], p.center[2]};
    g["radius"] = p.radius;
    g["half_width"] = p.half_width;
    nlohmann::json rot = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) rot.push_back({p.rotation(i, 0), p.rotation(i, 1), p.rotation(i, 2)});
    g["rotation"] = rot;
    g["cube_center"] = {p.cube_center[0], p.cube_center[1], p.cube_center[2]};
    g["cube_half_width"] = p.cube_half_width;
  }
  nlohmann::json t = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) t.push_back({c.target(i, 0), c.target(i, 1), c.target(i, 2)});
  return {{"geometry", g},
          {"target", t},
          {"basis", {{"p", c.basis_p}, {"ell", c.basis_ell}, {"tol", c.basis_tol}}},
          {"bem", {{"degree", c.bem_degree}, {"level", c.bem_level}}},
          {"optimizer", {{"J_tol", c.j_tol}, {"max_iter", c.max_iter}}},
          {"kernel", {{"N", c.kernel_degree}, {"cache", c.kernel_cache}}},
          {"output", {{"directory", c.output_directory}, {"vtk", c.output_vtk}, {"csv", c.output_csv}}}};
}

inline std::vector<PatchMap> config_patch_maps(const RunConfig& c) {
  if (!c.geometry.file.empty()) return read_geometry(c.geometry.file);
  return generate_primitive(detail::primitive_kind(c.geometry.generator), c.geometry.params);
}

inline PolynomialSurface config_surface(const RunConfig& c) {
  return build_surface(config_patch_maps(c), c.bem_level);
}

/// Loads the cached kernel; fits and writes it when allowed and absent.
inline PeriodicKernel load_kernel(const RunConfig& c, bool fit_if_missing, std::ostream& log) {
  if (!std::filesystem::exists(c.kernel_cache)) {
    if (!fit_if_missing)
      fail(ErrorKind::missing_kernel_cache, "no kernel coefficients at " + c.kernel_cache +
                                                " (run kernel-fit or pass --fit-kernel-if-missing)");
    log << "fitting periodic kernel correction, N = " << c.kernel_degree << "\n";
    write_kernel_cache(fit_correction(c.kernel_degree), c.kernel_cache);
  }
  KernelCoefficients k = read_kernel_cache(c.kernel_cache);
  if (k.degree != c.kernel_degree)
    fail(ErrorKind::schema, "cached kernel degree " + std::to_string(k.degree) + " differs from configured N = " +
                                std::to_string(c.kernel_degree));
  return PeriodicKernel(std::move(k));
}

inline const char* kCsvHeader = "iter,J,a11,a12,a13,a21,a22,a23,a31,a32,a33,grad_norm,step,wall_ms";

inline std::string csv_row(const IterationRecord& r) {
  std::string s = std::to_string(r.iteration) + "," + fmt12(r.J);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) s += "," + fmt12(r.tensor(i, k));
  s += "," + fmt12(r.gradient_norm) + "," + fmt12(r.step) + "," + fmt12(r.wall_ms);
  return s;
}

/// Runs a command body and converts library errors into exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

inline int cmd_kernel_fit(int degree, int samples, const std::string& out_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KernelCoefficients k = fit_correction(degree, samples);
    write_kernel_cache(k, out_path);
    out << "N = " << k.degree << ", residual " << fmt12(k.residual) << ", gradient residual "
        << fmt12(k.gradient_residual) << ", condition " << fmt12(k.condition) << "\n";
    return kExitOk;
  });
}

inline nlohmann::json tensor_json(const Mat3& a, double volume) {
  return {{"tensor", detail::mat3_json(a)}, {"cavity_volume", std::stod(fmt12(volume))}};
}

inline int cmd_tensor(const std::string& config_path, bool fit_if_missing, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig c = read_run_config(config_path);
    const PolynomialSurface s = config_surface(c);
    const PeriodicKernel k = load_kernel(c, fit_if_missing, err);
    const OperatorSet ops = assemble_operators(s, c.bem_degree, k);
    const CellSolution sol = solve_n2d(ops);
    const Mat3 a = effective_tensor(s, sol);
    nlohmann::json j = tensor_json(a, cavity_volume(s));
    j["J"] = std::stod(fmt12(shape_functional(a, c.target)));
    out << j.dump(1) << "\n";
    return kExitOk;
  });
}

/// Writes the generated geometry at the configured level as stencil patches.
inline int cmd_geometry_gen(const std::string& config_path, const std::string& out_path, std::ostream& out,
                            std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig c = read_run_config(config_path);
    const PolynomialSurface s = config_surface(c);
    write_geometry(stencil_patches(s), out_path);
    out << "wrote " << s.patches() << " patches, " << s.element_count() << " elements at level " << s.level()
        << "\n";
    return kExitOk;
  });
}

inline std::vector<VtkScalar> trace_scalars(const PolynomialSurface& s, const CellSolution& sol) {
  std::vector<VtkScalar> v;
  for (int i = 0; i < 3; ++i)
    v.push_back({"w" + std::to_string(i + 1),
                 [&s, &sol, i](int e, double u, double w) { return trace_eval(sol, s, e, u, w, i); }});
  return v;
}

inline int cmd_optimize(const std::string& config_path, const std::string& out_dir_override, bool fit_if_missing,
                        std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig c = read_run_config(config_path);
    const std::filesystem::path dir = out_dir_override.empty() ? c.output_directory : out_dir_override;
    std::filesystem::create_directories(dir);
    const PolynomialSurface ref = config_surface(c);
    const PeriodicKernel k = load_kernel(c, fit_if_missing, err);
    DeformationBasis basis = build_deformation_basis(ref, c.basis_p, c.basis_ell, c.basis_tol);
    OptimizationConfig oc;
    oc.target = c.target;
    oc.j_tol = c.j_tol;
    oc.max_iter = c.max_iter;
    oc.level = c.bem_level;
    oc.degree = c.bem_degree;
    ShapeOptimizer opt(ref, std::move(basis), k, oc);
    const std::string csv_path = (dir / c.output_csv).string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) fail(ErrorKind::io, "cannot open " + csv_path);
    csv << kCsvHeader << "\n";
    auto hook = [&](const IterationRecord& r, const Evaluation& ev) {
      csv << csv_row(r) << "\n";
      csv.flush();
      out << "iter " << r.iteration << "  J = " << fmt12(r.J) << "  |g| = " << fmt12(r.gradient_norm)
          << "  step = " << fmt12(r.step) << "\n";
      if (c.output_vtk) {
        char name[32];
        std::snprintf(name, sizeof name, "surface_%03d.vtk", r.iteration);
        const PolynomialSurface& s = ev.surface;
        std::vector<VtkVector> vec{{"displacement", [&s, &ref](int e, double u, double v) -> Vec3 {
                                      return s.evaluate(e, u, v).x - ref.evaluate(e, u, v).x;
                                    }}};
        export_vtk(s, (dir / name).string(), trace_scalars(s, ev.solution), vec);
      }
    };
    int code = kExitOk;
    std::string failure;
    try {
      opt.run(hook);
      if (!opt.converged()) {
        code = kExitOptimization;
        failure = "J_tol not reached within max_iter steps";
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::line_search_failure && e.kind() != ErrorKind::numerical_breakdown) throw;
      code = kExitOptimization;
      failure = e.what();
    }
    const auto& hist = opt.history();
    nlohmann::json summary;
    summary["converged"] = code == kExitOk;
    summary["iterations"] = hist.empty() ? 0 : hist.back().iteration;
    if (!hist.empty()) {
      const IterationRecord& last = hist.back();
      summary["J"] = std::stod(fmt12(last.J));
      summary["tensor"] = detail::mat3_json(last.tensor);
      nlohmann::json y = nlohmann::json::array();
      for (Eigen::Index i = 0; i < last.y.size(); ++i) y.push_back(last.y[i]);
      summary["y"] = y;
    }
    if (!failure.empty()) summary["failure"] = failure;
    summary["config"] = run_config_to_json(c);
    write_text_file((dir / "summary.json").string(), summary.dump(1) + "\n");
    if (code != kExitOk) err << "optimization failed: " << failure << "\n";
    return code;
  });
}

}  // namespace scaffold
