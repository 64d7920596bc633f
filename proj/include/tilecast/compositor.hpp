#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tilecast/frame.hpp"
#include "tilecast/media_sources.hpp"

namespace tilecast {

struct CanvasConfig {
  int width = 1920;
  int height = 1080;
  double fps = 30.0;
  int rows = 2;
  int cols = 2;
  // Pull (and discard) frames from sources that are not on screen, making the
  // per-tick cost grow with the source count.
  bool sample_hidden_pages = false;

  int tiles_per_page() const { return rows * cols; }
  // Throws ConfigError unless dimensions divide by the 8-pixel block size and by the grid.
  void validate() const;
};

struct TileGeometry {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const TileGeometry&, const TileGeometry&) = default;
};

struct Tile {
  std::optional<int> source_id;
  TileGeometry geometry;  // current rectangle on the canvas
  TileGeometry home;      // grid rectangle, reinstated by restore
  bool visible = true;

  friend bool operator==(const Tile&, const Tile&) = default;
};

// Tiles of every page, page-major; tile id = page * tiles_per_page + slot.
struct LayoutState {
  int page_index = 0;
  int tiles_per_page = 4;
  std::vector<Tile> tiles;
  std::optional<int> maximized;

  int page_count() const { return static_cast<int>(tiles.size()) / tiles_per_page; }
  int page_of(int tile) const { return tile / tiles_per_page; }

  friend bool operator==(const LayoutState&, const LayoutState&) = default;
};

/// Binds sources to tiles row-major, tiles_per_page per page; always at least
/// one page, trailing tiles empty.
LayoutState assign_sources(std::span<const SourceDescriptor> sources, const CanvasConfig& canvas);

// Layout transitions. All throw StateError on invalid use.
void maximize(LayoutState& layout, int tile, const CanvasConfig& canvas);
void restore(LayoutState& layout);
void page_next(LayoutState& layout);
void page_prev(LayoutState& layout);

// Paint `src` into `rect` of `dst` with nearest-neighbour sampling:
// dst(x, y) = src(floor(x * sw / tw), floor(y * sh / th)) in tile coordinates.
void scale_into(const Frame& src, Frame& dst, const TileGeometry& rect);
namespace reference {
void scale_into(const Frame& src, Frame& dst, const TileGeometry& rect);
}

inline constexpr RgbPixel kBackground{0x80, 0x80, 0x80};

// Owns the sources, the layout and the fixed-size render target. Single
// owner; other threads talk to it through DirectorChannel.
class Compositor {
 public:
  Compositor(CanvasConfig canvas, std::vector<std::unique_ptr<Source>> sources);

  const CanvasConfig& canvas() const { return canvas_; }
  const LayoutState& layout() const { return layout_; }
  std::size_t source_count() const { return sources_.size(); }

  void maximize(int tile);
  void restore();
  // Click semantics: restore when something is maximized, else maximize `tile`.
  void toggle(int tile);
  void page_next();
  void page_prev();
  void add_source(std::unique_ptr<Source> source);

  /// Renders the current page (or the maximized tile) into the render target
  /// and stamps `now_us` into its timestamp strip.
  const Frame& compose_tick(std::uint64_t tick, std::uint64_t now_us);

  // Copy of the last composed frame. Throws StateError before the first tick.
  Frame snapshot() const;

  // Number of next_frame calls made by the last compose_tick.
  std::size_t sources_sampled_last_tick() const { return sampled_last_tick_; }

 private:
  void rebuild_layout();

  CanvasConfig canvas_;
  std::vector<std::unique_ptr<Source>> sources_;
  LayoutState layout_;
  Frame target_;
  bool composed_ = false;
  std::size_t sampled_last_tick_ = 0;
};

// ---- serialized command channel ----

struct MaximizeCmd { int tile; };
struct RestoreCmd {};
struct ToggleCmd { int tile; };
struct PageNextCmd {};
struct PagePrevCmd {};
using DirectorCommand = std::variant<MaximizeCmd, RestoreCmd, ToggleCmd, PageNextCmd, PagePrevCmd>;

struct CommandOutcome {
  bool ok = true;
  std::string error;
  LayoutState layout;
};

// Commands queued from any thread and applied by the compose loop between
// ticks. Each submit yields the layout after the command ran.
class DirectorChannel {
 public:
  std::future<CommandOutcome> submit(DirectorCommand cmd);
  // Applies queued commands in arrival order. Called by the compositor owner.
  void drain(Compositor& compositor);
  // Fails every queued command; used on shutdown.
  void cancel_all(const std::string& reason);

 private:
  std::mutex mutex_;
  std::deque<std::pair<DirectorCommand, std::promise<CommandOutcome>>> queue_;
};

}  // namespace tilecast
