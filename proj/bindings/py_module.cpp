// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "poselift/camera.hpp"
#include "poselift/checkpoint.hpp"
#include "poselift/common.hpp"
#include "poselift/constraints.hpp"
#include "poselift/data.hpp"
#include "poselift/liftnet.hpp"
#include "poselift/metrics.hpp"
#include "poselift/normflow.hpp"
#include "poselift/regnet.hpp"
#include "poselift/skeleton.hpp"

namespace py = pybind11;
using namespace poselift;

// Python surface uses the default 17-joint topology throughout; alternate
// skeletons stay a C++-level concern.
namespace {
const Topology& topo() { return default_topology(); }
}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "poselift: monocular 3D human pose numerics";
  m.attr("__version__") = "0.1.0";

  py::register_exception<InputError>(m, "InputError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<Topology>(m, "Topology")
      .def_readonly("joint_count", &Topology::joint_count)
      .def_readonly("joint_names", &Topology::joint_names)
      .def_property_readonly("bones",
                             [](const Topology& t) {
                               std::vector<std::pair<int, int>> out;
                               for (const auto& b : t.bones) out.emplace_back(b.parent, b.child);
                               return out;
                             })
      .def("content_hash", &Topology::content_hash);
  m.def("default_topology", &topo, py::return_value_policy::reference);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("f_w", &CameraIntrinsics::f_w)
      .def_readwrite("f_h", &CameraIntrinsics::f_h)
      .def_readwrite("c_w", &CameraIntrinsics::c_w)
      .def_readwrite("c_h", &CameraIntrinsics::c_h)
      .def_readwrite("s_w", &CameraIntrinsics::s_w)
      .def_readwrite("s_h", &CameraIntrinsics::s_h)
      .def("K", &CameraIntrinsics::K);

  py::class_<CameraExtrinsics>(m, "CameraExtrinsics")
      .def(py::init<>())
      .def_readwrite("R", &CameraExtrinsics::R)
      .def_readwrite("t", &CameraExtrinsics::t)
      .def("validate", &CameraExtrinsics::validate);

  py::class_<CropGeometry>(m, "CropGeometry")
      .def(py::init<>())
      .def_readwrite("w_full", &CropGeometry::w_full)
      .def_readwrite("h_full", &CropGeometry::h_full)
      .def_readwrite("left", &CropGeometry::left)
      .def_readwrite("top", &CropGeometry::top)
      .def_readwrite("w_bb", &CropGeometry::w_bb)
      .def_readwrite("h_bb", &CropGeometry::h_bb)
      .def_readwrite("w", &CropGeometry::w)
      .def_readwrite("h", &CropGeometry::h)
      .def_readwrite("mu_h", &CropGeometry::mu_h);

  m.def("project",
        [](const Pose3D& y, const CameraIntrinsics& K, const CameraExtrinsics& E) {
          return project(y, K, E, topo());
        },
        py::arg("y"), py::arg("K"), py::arg("E"));
  m.def("unproject",
        [](const Pose2D& x, const Eigen::VectorXd& depths, const CameraIntrinsics& K,
           const CameraExtrinsics& E) { return unproject(x, depths, K, E, topo()); },
        py::arg("x"), py::arg("depths"), py::arg("K"), py::arg("E"));
  m.def("joint_depths",
        [](const Pose3D& y, const CameraExtrinsics& E) { return joint_depths(y, E, topo()); },
        py::arg("y"), py::arg("E"));
  m.def("intrinsics_from_crop", &intrinsics_from_crop, py::arg("crop"));
  m.def("extrinsics_from_angles", &extrinsics_from_angles, py::arg("theta_x"), py::arg("theta_y"),
        py::arg("w_p"), py::arg("K"));
  m.def("extrinsics_from_capsule", &extrinsics_from_capsule, py::arg("gamma"), py::arg("K"));
  m.def("rotate_azimuth",
        [](const Pose3D& y, double theta) { return rotate_azimuth(y, theta, topo()); },
        py::arg("y"), py::arg("theta"));

  m.def("root_center", [](const Eigen::VectorXd& p) { return root_center(p, topo()); },
        py::arg("pose"));
  m.def("normalize_pose2d", [](const Pose2D& x) { return normalize_pose2d(x, topo()); },
        py::arg("x"));
  m.def("limbs_loss", [](const Pose3D& y) { return limbs_loss(y, topo()); }, py::arg("y"));

  m.def("mpjpe", [](const Pose3D& p, const Pose3D& g) { return mpjpe(p, g, topo()); },
        py::arg("pred"), py::arg("gt"));
  m.def("pa_mpjpe", [](const Pose3D& p, const Pose3D& g) { return pa_mpjpe(p, g, topo()); },
        py::arg("pred"), py::arg("gt"));
  m.def("n_mpjpe", [](const Pose3D& p, const Pose3D& g) { return n_mpjpe(p, g, topo()); },
        py::arg("pred"), py::arg("gt"));
  m.def("n_pck",
        [](const Pose3D& p, const Pose3D& g, double thr) { return n_pck(p, g, thr, topo()); },
        py::arg("pred"), py::arg("gt"), py::arg("threshold_mm"));
  m.def("auc", [](const Pose3D& p, const Pose3D& g) { return auc(p, g, topo()); },
        py::arg("pred"), py::arg("gt"));

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("count", &SyntheticConfig::count)
      .def_readwrite("seed", &SyntheticConfig::seed)
      .def_readwrite("noise_px", &SyntheticConfig::noise_px)
      .def_readwrite("mu_h", &SyntheticConfig::mu_h)
      .def_readwrite("dist_min_mm", &SyntheticConfig::dist_min_mm)
      .def_readwrite("dist_max_mm", &SyntheticConfig::dist_max_mm);

  py::class_<SampleRecord>(m, "SampleRecord")
      .def(py::init<>())
      .def_readwrite("id", &SampleRecord::id)
      .def_readwrite("y_gt", &SampleRecord::y_gt)
      .def_readwrite("x_gt", &SampleRecord::x_gt)
      .def_readwrite("crop", &SampleRecord::crop)
      .def_readwrite("K", &SampleRecord::K)
      .def_readwrite("E", &SampleRecord::E)
      .def_readwrite("features_ref", &SampleRecord::features_ref);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("joint_count", &Dataset::joint_count)
      .def_readwrite("records", &Dataset::records);

  m.def("generate", &generate, py::arg("config"));
  m.def("save_dataset",
        [](const Dataset& ds, const std::string& path) { save_dataset(ds, path); },
        py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", [](const std::string& path) { return load_dataset(path); },
        py::arg("path"));

  py::class_<FlowModel>(m, "FlowModel")
      .def_readonly("dim", &FlowModel::dim)
      .def("nll", [](const FlowModel& fm, const Pose2D& x) { return nf_loss_pose(x, fm, topo()); },
           py::arg("x"), "Negative log-likelihood of a raw 2D pose");
  m.def("load_flow",
        [](const std::string& path) { return FlowModel::from_checkpoint(Checkpoint::load(path)); },
        py::arg("path"));

  py::class_<LifterParams>(m, "LifterParams")
      .def_readonly("dim_l", &LifterParams::dim_l)
      .def_readonly("depth_prior", &LifterParams::depth_prior);
  m.def("load_lifter",
        [](const std::string& path) {
          Checkpoint ck = Checkpoint::load(path);
          LifterParams params;
          BoneRatioStats stats;
          lifter_from_checkpoint(ck, topo(), params, stats);
          return params;
        },
        py::arg("path"));
  m.def("lift",
        [](const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
           const LifterParams& params) { return lift(x, K, E, params, topo()); },
        py::arg("x"), py::arg("K"), py::arg("E"), py::arg("params"));
}
