#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pbrmat/image.hpp"
#include "pbrmat/vec.hpp"

namespace pbrmat {

// Order matters: ties in nearest-row classification resolve to the lower enum.
enum class MaterialCategory : int { kHair = 0, kSkin = 1, kFabric = 2, kLeather = 3 };

inline constexpr int kNumCategories = 4;

struct CategoryParams {
  double specular;
  double roughness;
  double sss;
};

using CategoryTable = std::array<CategoryParams, kNumCategories>;

// Fitted (specular, roughness, subsurface) triple per category.
inline constexpr CategoryTable kCategoryTable{{
    {0.239, 0.500, 0.00},  // Hair
    {0.184, 0.400, 0.08},  // Skin
    {0.263, 0.850, 0.00},  // Fabric
    {0.224, 0.250, 0.00},  // Leather
}};

inline constexpr CategoryParams category_params(MaterialCategory c) {
  return kCategoryTable[static_cast<int>(c)];
}

inline const char* to_string(MaterialCategory c) {
  switch (c) {
    case MaterialCategory::kHair: return "Hair";
    case MaterialCategory::kSkin: return "Skin";
    case MaterialCategory::kFabric: return "Fabric";
    case MaterialCategory::kLeather: return "Leather";
  }
  return "?";
}

inline std::optional<MaterialCategory> category_from_string(std::string_view s) {
  for (int i = 0; i < kNumCategories; ++i) {
    auto c = static_cast<MaterialCategory>(i);
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

// Per-pixel material description of one planar sample.
//   normal: 3ch, camera space encoded as n*0.5+0.5
//   diffuse: 3ch linear RGB; roughness/specular/sss/displacement: 1ch in [0,1]
//   mask: 1ch binary; pixels outside the mask hold zeros in every map
struct MaterialMaps {
  Image normal;
  Image diffuse;
  Image roughness;
  Image specular;
  Image sss;
  Image displacement;
  Image mask;

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }
};

inline MaterialMaps make_maps(int width, int height) {
  MaterialMaps m;
  m.normal = Image(width, height, 3);
  m.diffuse = Image(width, height, 3);
  m.roughness = Image(width, height, 1);
  m.specular = Image(width, height, 1);
  m.sss = Image(width, height, 1);
  m.displacement = Image(width, height, 1);
  m.mask = Image(width, height, 1);
  return m;
}

struct MapViolation {
  std::string channel;
  int x = -1, y = -1;
  std::string rule;
};

struct ValidationError : std::invalid_argument {
  std::vector<MapViolation> violations;
  explicit ValidationError(std::vector<MapViolation> v)
      : std::invalid_argument(summarize(v)), violations(std::move(v)) {}

 private:
  static std::string summarize(const std::vector<MapViolation>& v) {
    std::ostringstream os;
    os << "material maps failed validation (" << v.size() << " violations)";
    for (std::size_t i = 0; i < v.size() && i < 8; ++i)
      os << "; " << v[i].channel << "@" << v[i].x << "," << v[i].y << ": "
         << v[i].rule;
    return os.str();
  }
};

inline std::vector<MapViolation> validate_maps(const MaterialMaps& m) {
  std::vector<MapViolation> out;
  const Image* chans[] = {&m.normal,   &m.diffuse, &m.roughness, &m.specular,
                          &m.sss,      &m.displacement, &m.mask};
  const char* names[] = {"normal", "diffuse", "roughness", "specular",
                         "sss",    "disp",    "mask"};
  if (m.mask.empty() || m.mask.channels() != 1) {
    out.push_back({"mask", -1, -1, "missing or not single-channel"});
    return out;
  }
  for (int i = 0; i < 7; ++i) {
    int want_c = (i == 0 || i == 1) ? 3 : 1;
    if (chans[i]->width() != m.mask.width() ||
        chans[i]->height() != m.mask.height() ||
        chans[i]->channels() != want_c) {
      out.push_back({names[i], -1, -1, "dimension mismatch"});
    }
  }
  if (!out.empty()) return out;

  int w = m.width(), h = m.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float mk = m.mask.at(x, y, 0);
      if (mk != 0.0f && mk != 1.0f)
        out.push_back({"mask", x, y, "not binary"});
      if (mk == 0.0f) {
        for (int i = 0; i < 6; ++i)
          for (int c = 0; c < chans[i]->channels(); ++c)
            if (chans[i]->at(x, y, c) != 0.0f) {
              out.push_back({names[i], x, y, "nonzero outside mask"});
              break;
            }
        continue;
      }
      for (int i = 0; i < 6; ++i)
        for (int c = 0; c < chans[i]->channels(); ++c) {
          float v = chans[i]->at(x, y, c);
          if (!(v >= 0.0f && v <= 1.0f)) {
            out.push_back({names[i], x, y, "outside [0,1]"});
            break;
          }
        }
      double nx = m.normal.at(x, y, 0) * 2.0 - 1.0;
      double ny = m.normal.at(x, y, 1) * 2.0 - 1.0;
      double nz = m.normal.at(x, y, 2) * 2.0 - 1.0;
      double len = std::sqrt(nx * nx + ny * ny + nz * nz);
      if (std::abs(len - 1.0) > 1e-3)
        out.push_back({"normal", x, y, "not unit length"});
      if (nz < -1e-9)
        out.push_back({"normal", x, y, "points away from camera"});
    }
  }
  return out;
}

// Per-pixel category indices aligned with a MaterialMaps; -1 where unlabeled.
struct RegionLabels {
  Image idx;

  std::optional<MaterialCategory> at(int x, int y) const {
    float v = idx.at(x, y, 0);
    if (v < 0.0f) return std::nullopt;
    return static_cast<MaterialCategory>(static_cast<int>(v));
  }
};

inline RegionLabels make_labels(int width, int height) {
  return {Image(width, height, 1, -1.0f)};
}

// Nearest table row in unweighted (roughness, specular, sss) Euclidean
// distance; ties go to the lower category index.
inline MaterialCategory classify_pixel(double r, double s, double sss) {
  MaterialCategory best = MaterialCategory::kHair;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumCategories; ++i) {
    CategoryParams p = kCategoryTable[i];
    double dr = r - p.roughness, ds = s - p.specular, dx = sss - p.sss;
    double d2 = dr * dr + ds * ds + dx * dx;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<MaterialCategory>(i);
    }
  }
  return best;
}

inline RegionLabels classify_materials(const MaterialMaps& m) {
  RegionLabels out = make_labels(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (m.mask.at(x, y, 0) != 1.0f) continue;
      MaterialCategory c = classify_pixel(
          m.roughness.at(x, y, 0), m.specular.at(x, y, 0), m.sss.at(x, y, 0));
      out.idx.at(x, y, 0) = static_cast<float>(static_cast<int>(c));
    }
  return out;
}

// Rewrites (roughness, specular, sss) of every pixel labeled `target` with
// `replacement`'s table row and optionally tints its diffuse color. All other
// pixels and channels pass through bit-exact.
inline MaterialMaps apply_category_edit(const MaterialMaps& m,
                                        const RegionLabels& labels,
                                        MaterialCategory target,
                                        MaterialCategory replacement,
                                        const std::optional<Vec3d>& tint) {
  if (labels.idx.width() != m.width() || labels.idx.height() != m.height())
    throw std::invalid_argument("apply_category_edit: labels shape mismatch");
  MaterialMaps out = m;
  CategoryParams row = category_params(replacement);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (labels.at(x, y) != target) continue;
      out.roughness.at(x, y, 0) = static_cast<float>(row.roughness);
      out.specular.at(x, y, 0) = static_cast<float>(row.specular);
      out.sss.at(x, y, 0) = static_cast<float>(row.sss);
      if (tint) {
        out.diffuse.at(x, y, 0) =
            static_cast<float>(clamp01(m.diffuse.at(x, y, 0) * tint->x));
        out.diffuse.at(x, y, 1) =
            static_cast<float>(clamp01(m.diffuse.at(x, y, 1) * tint->y));
        out.diffuse.at(x, y, 2) =
            static_cast<float>(clamp01(m.diffuse.at(x, y, 2) * tint->z));
      }
    }
  return out;
}

}  // namespace pbrmat
