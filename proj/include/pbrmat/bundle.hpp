#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pbrmat/errors.hpp"
#include "pbrmat/estimator.hpp"
#include "pbrmat/lighting.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/pfm.hpp"

namespace pbrmat {

// A material bundle is a directory of PFMs: normal, diffuse, roughness,
// specular, sss, displacement, mask, optionally labels (category index per
// pixel). Observation sets add obs_NN.pfm per light plus rig.txt.

namespace detail {

inline std::string bundle_path(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

inline void save_bundle(const std::string& dir, const MaterialMaps& maps) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
  write_pfm(detail::bundle_path(dir, "normal.pfm"), maps.normal);
  write_pfm(detail::bundle_path(dir, "diffuse.pfm"), maps.diffuse);
  write_pfm(detail::bundle_path(dir, "roughness.pfm"), maps.roughness);
  write_pfm(detail::bundle_path(dir, "specular.pfm"), maps.specular);
  write_pfm(detail::bundle_path(dir, "sss.pfm"), maps.sss);
  write_pfm(detail::bundle_path(dir, "displacement.pfm"), maps.displacement);
  write_pfm(detail::bundle_path(dir, "mask.pfm"), maps.mask);
}

inline MaterialMaps load_bundle(const std::string& dir) {
  MaterialMaps m;
  m.normal = read_pfm(detail::bundle_path(dir, "normal.pfm"));
  m.diffuse = read_pfm(detail::bundle_path(dir, "diffuse.pfm"));
  m.roughness = read_pfm(detail::bundle_path(dir, "roughness.pfm"));
  m.specular = read_pfm(detail::bundle_path(dir, "specular.pfm"));
  m.sss = read_pfm(detail::bundle_path(dir, "sss.pfm"));
  m.displacement = read_pfm(detail::bundle_path(dir, "displacement.pfm"));
  m.mask = read_pfm(detail::bundle_path(dir, "mask.pfm"));
  return m;
}

inline void save_labels(const std::string& dir, const RegionLabels& labels) {
  write_pfm(detail::bundle_path(dir, "labels.pfm"), labels.idx);
}

inline RegionLabels load_labels(const std::string& dir) {
  return {read_pfm(detail::bundle_path(dir, "labels.pfm"))};
}

inline void save_rig(const std::string& path, const LightRig& rig) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << format_rig(rig);
  if (!out) throw IoError("write failed: " + path);
}

inline LightRig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  LightRig rig;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    DirectionalLight l;
    if (!(row >> l.direction.x >> l.direction.y >> l.direction.z >>
          l.intensity.x >> l.intensity.y >> l.intensity.z))
      throw IoError("unparseable light line in " + path + ": " + line);
    rig.push_back(l);
  }
  if (rig.empty()) throw IoError("no lights in " + path);
  return rig;
}

inline void save_observations(const std::string& dir,
                              const ObservationSet& obs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
  for (std::size_t i = 0; i < obs.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "obs_%02zu.pfm", i);
    write_pfm(detail::bundle_path(dir, name), obs.images[i]);
  }
  save_rig(detail::bundle_path(dir, "rig.txt"), obs.rig);
}

// Loads the observation images named by rig.txt, sharing the bundle's mask.
inline ObservationSet load_observations(const std::string& dir) {
  ObservationSet obs;
  obs.rig = load_rig(detail::bundle_path(dir, "rig.txt"));
  obs.mask = read_pfm(detail::bundle_path(dir, "mask.pfm"));
  for (std::size_t i = 0; i < obs.rig.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "obs_%02zu.pfm", i);
    obs.images.push_back(read_pfm(detail::bundle_path(dir, name)));
  }
  validate_observations(obs);
  return obs;
}

// One CSV row per optimization step across all stages. Exactly one of the
// controlled and plain render terms is nonzero for a given stage, so their
// sum is that stage's render column.
inline void write_traces_csv(const std::string& path,
                             const std::vector<StageTrace>& stages) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "stage,step,pixel,render,total\n";
  char row[160];
  for (const StageTrace& st : stages) {
    for (std::size_t i = 0; i < st.steps.size(); ++i) {
      const LossReport& r = st.steps[i];
      std::snprintf(row, sizeof(row), "%s,%zu,%.9g,%.9g,%.9g\n",
                    to_string(st.stage), i, r.pixel, r.cpr + r.render, r.total);
      out << row;
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace pbrmat
