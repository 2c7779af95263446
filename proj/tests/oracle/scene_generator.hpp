#pragma once

// Random small detection scenes and manifests for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "protoeval/annotation.hpp"

namespace testgen {

struct Scene {
  protoeval::DatasetManifest manifest;
  std::vector<protoeval::DetectionSet> detections;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline protoeval::BoundingBox random_box(std::mt19937_64& rng, double frame = 100.0) {
  double x = uniform(rng, 0.0, frame * 0.8);
  double y = uniform(rng, 0.0, frame * 0.8);
  double w = uniform(rng, 1.0, frame * 0.4);
  double h = uniform(rng, 1.0, frame * 0.4);
  return {x, y, x + w, y + h};
}

inline protoeval::BoundingBox jitter(std::mt19937_64& rng, const protoeval::BoundingBox& b,
                                     double amount) {
  auto shift = [&](double v) { return std::max(0.0, v + uniform(rng, -amount, amount)); };
  protoeval::BoundingBox out{shift(b.x_min), shift(b.y_min), shift(b.x_max), shift(b.y_max)};
  if (out.x_max <= out.x_min) {
    out.x_max = out.x_min + 1.0;
  }
  if (out.y_max <= out.y_min) {
    out.y_max = out.y_min + 1.0;
  }
  return out;
}

/// At most `max_images` images, `max_truths` objects and `max_dets`
/// detections per image. Confidences are drawn from a coarse grid so ties
/// happen regularly; detections are a mix of near-duplicates and clutter.
inline Scene random_scene(std::mt19937_64& rng, int max_images = 10, int max_truths = 5,
                          int max_dets = 8, int n_classes = 2) {
  Scene scene;
  for (int c = 0; c < n_classes; ++c) {
    scene.manifest.class_names.push_back("class" + std::to_string(c));
  }
  const int n_images = uniform_int(rng, 1, max_images);
  for (int i = 0; i < n_images; ++i) {
    protoeval::ImageRecord record;
    record.image_id = "img" + std::to_string(uniform_int(rng, 0, 999)) + "_" + std::to_string(i);
    const int n_truths = uniform_int(rng, 0, max_truths);
    for (int g = 0; g < n_truths; ++g) {
      record.objects.push_back(
          {static_cast<protoeval::ClassId>(uniform_int(rng, 0, n_classes - 1)), random_box(rng)});
    }
    record.is_negative = record.objects.empty();

    protoeval::DetectionSet set{record.image_id, {}};
    const int n_dets = uniform_int(rng, 0, max_dets);
    for (int d = 0; d < n_dets; ++d) {
      protoeval::Detection det;
      if (!record.objects.empty() && uniform(rng, 0.0, 1.0) < 0.7) {
        const auto& target =
            record.objects[uniform_int(rng, 0, static_cast<int>(record.objects.size()) - 1)];
        det.class_id = uniform(rng, 0.0, 1.0) < 0.85
                           ? target.class_id
                           : static_cast<protoeval::ClassId>(uniform_int(rng, 0, n_classes - 1));
        det.box = jitter(rng, target.box, uniform(rng, 0.0, 15.0));
      } else {
        det.class_id = static_cast<protoeval::ClassId>(uniform_int(rng, 0, n_classes - 1));
        det.box = random_box(rng);
      }
      det.confidence = uniform_int(rng, 0, 20) / 20.0;
      set.detections.push_back(det);
    }
    scene.manifest.images.push_back(std::move(record));
    if (uniform(rng, 0.0, 1.0) < 0.9) {
      scene.detections.push_back(std::move(set));
    }
  }
  return scene;
}

/// Values that survive six-decimal rendering exactly.
inline double six_decimal(std::mt19937_64& rng, double lo, double hi) {
  const auto scaled = static_cast<long long>(std::llround(uniform(rng, lo, hi) * 1e6));
  return std::stod(std::to_string(scaled / 1000000) + "." + [&] {
    std::string frac = std::to_string(scaled % 1000000);
    return std::string(6 - frac.size(), '0') + frac;
  }());
}

inline protoeval::DatasetManifest random_manifest(std::mt19937_64& rng) {
  static const char* kNames[] = {"mdf", "plywood", "microcontroller", "hardboard \"HDF\"",
                                 "osb/particle", "bjørk"};
  protoeval::DatasetManifest m;
  const int n_classes = uniform_int(rng, 1, 6);
  for (int c = 0; c < n_classes; ++c) {
    m.class_names.push_back(kNames[c]);
  }
  const int n_images = uniform_int(rng, 0, 12);
  for (int i = 0; i < n_images; ++i) {
    protoeval::ImageRecord r;
    r.image_id = "capture_" + std::to_string(i) + (i % 3 == 0 ? "/view\t1.jpg" : ".jpg");
    r.source = static_cast<protoeval::ImageSource>(uniform_int(rng, 0, 2));
    if (uniform_int(rng, 0, 1) == 1) {
      protoeval::CaptureMetadata c;
      c.capture_id = "cap-" + std::to_string(uniform_int(rng, 0, 50));
      c.view_index = uniform_int(rng, 1, 7);
      c.captured_at = "2019-03-" + std::string(uniform_int(rng, 0, 1) ? "05" : "21") +
                      "T10:15:0" + std::to_string(uniform_int(rng, 0, 9)) +
                      (uniform_int(rng, 0, 1) ? "Z" : "+01:00");
      c.location = uniform_int(rng, 0, 1) ? "Trondheim lab" : "";
      c.author = "team " + std::to_string(uniform_int(rng, 1, 9));
      c.image_width = 1920;
      c.image_height = 1080;
      r.capture = c;
    }
    const int n_objects = uniform_int(rng, 0, 4);
    for (int k = 0; k < n_objects; ++k) {
      double x0 = six_decimal(rng, 0.0, 1800.0);
      double y0 = six_decimal(rng, 0.0, 1000.0);
      double x1 = x0 + six_decimal(rng, 0.5, 100.0);
      double y1 = y0 + six_decimal(rng, 0.5, 80.0);
      // Sums can pick up more than six decimals; re-round through text.
      x1 = std::stod(std::to_string(x1));
      y1 = std::stod(std::to_string(y1));
      r.objects.push_back({static_cast<protoeval::ClassId>(uniform_int(rng, 0, n_classes - 1)),
                           {x0, y0, x1, y1}});
    }
    r.is_negative = r.objects.empty();
    m.images.push_back(std::move(r));
  }
  return m;
}

} // namespace testgen
