#pragma once

#include "gigags/pipeline/bundle.hpp"

#include <filesystem>
#include <functional>

namespace gigags {

/// Reads cameras.txt, images.txt and points3D.txt (COLMAP text format) from
/// `dir`. PINHOLE and SIMPLE_PINHOLE cameras; principal points are taken as
/// written. Poses are inverted from COLMAP's world-to-camera form. View ids and
/// embedding ids are the image ids. Points observed by fewer than two images are
/// dropped. Views come back without pixels.
/// Throws IoError, UnsupportedCameraModel, MalformedLine (file and line number).
SceneBundle parse_colmap(const std::filesystem::path &dir);

/// Decides whether a point is observed by a view (for the written tracks).
using Visibility = std::function<bool(const View &, const Vec3 &)>;

/// Writes the three COLMAP text files. Each point's track lists the views for
/// which `visible` holds; the default accepts every view the point projects into.
/// Throws IoError.
void write_colmap(const SceneBundle &bundle, const std::filesystem::path &dir, const Visibility &visible = {});

/// Loads every view's image from image_dir / image_names[i]. Throws IoError, DimensionMismatch.
void load_images(SceneBundle &bundle, const std::filesystem::path &image_dir);

/// Whitespace-separated view ids; '#' starts a comment. Throws IoError, MalformedLine.
std::vector<int> read_test_ids(const std::filesystem::path &path);

/// Box-filters by an integer factor (trailing rows/columns that do not fill a
/// block are dropped). Throws InvalidArgument for factor < 1.
ImageBuffer downscale_image(const ImageBuffer &img, int factor);

/// Downscales images and intrinsics of every view.
void downscale_bundle(SceneBundle &bundle, int factor);

/// Rotation taking the mean camera down axis to -y (minimal rotation).
/// Throws TooFewCameras below three views, DegenerateOrientation when the mean
/// down axis has norm < 0.1.
Mat3 manhattan_rotation(const std::vector<View> &views);

/// Rotates poses and points by manhattan_rotation and records it in `alignment`.
SceneBundle manhattan_align(const SceneBundle &bundle);

} // namespace gigags
