#include "tilecast/compositor.hpp"

#include <algorithm>

#include "tilecast/errors.hpp"

namespace tilecast {
namespace {

TileGeometry grid_cell(const CanvasConfig& canvas, int slot) {
  const int w = canvas.width / canvas.cols;
  const int h = canvas.height / canvas.rows;
  return {(slot % canvas.cols) * w, (slot / canvas.cols) * h, w, h};
}

void scale_rows(const Frame& src, Frame& dst, const TileGeometry& rect, int row_begin, int row_end) {
  for (int y = row_begin; y < row_end; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * src.height / rect.height);
    const std::uint8_t* src_row = &src.rgb[static_cast<std::size_t>(sy) * src.width * 3];
    std::uint8_t* dst_row = &dst.rgb[(static_cast<std::size_t>(rect.y + y) * dst.width + rect.x) * 3];
    for (int x = 0; x < rect.width; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * src.width / rect.width);
      std::copy_n(src_row + static_cast<std::size_t>(sx) * 3, 3, dst_row + static_cast<std::size_t>(x) * 3);
    }
  }
}

void check_rect(const Frame& src, const Frame& dst, const TileGeometry& rect) {
  if (src.width <= 0 || src.height <= 0) throw DimensionError("cannot scale an empty frame");
  if (rect.x < 0 || rect.y < 0 || rect.width <= 0 || rect.height <= 0 || rect.x + rect.width > dst.width ||
      rect.y + rect.height > dst.height)
    throw DimensionError("tile rectangle outside the render target");
}

}  // namespace

void CanvasConfig::validate() const {
  if (width <= 0 || height <= 0 || width % 8 != 0 || height % 8 != 0)
    throw ConfigError("canvas dimensions must be positive multiples of 8");
  if (rows < 1 || cols < 1 || width % cols != 0 || height % rows != 0)
    throw ConfigError("canvas dimensions must divide evenly by the tile grid");
  if (!(fps > 0)) throw ConfigError("canvas fps must be positive");
}

LayoutState assign_sources(std::span<const SourceDescriptor> sources, const CanvasConfig& canvas) {
  LayoutState layout;
  layout.tiles_per_page = canvas.tiles_per_page();
  const int k = static_cast<int>(sources.size());
  const int pages = std::max(1, (k + layout.tiles_per_page - 1) / layout.tiles_per_page);
  layout.tiles.resize(static_cast<std::size_t>(pages) * layout.tiles_per_page);
  for (int t = 0; t < static_cast<int>(layout.tiles.size()); ++t) {
    Tile& tile = layout.tiles[t];
    tile.home = grid_cell(canvas, t % layout.tiles_per_page);
    tile.geometry = tile.home;
    if (t < k) tile.source_id = sources[t].id;
  }
  return layout;
}

void maximize(LayoutState& layout, int tile, const CanvasConfig& canvas) {
  if (layout.maximized) throw StateError("a tile is already maximized");
  if (tile < 0 || tile >= static_cast<int>(layout.tiles.size())) throw StateError("no such tile");
  if (layout.page_of(tile) != layout.page_index) throw StateError("tile is not on the current page");
  const int first = layout.page_index * layout.tiles_per_page;
  for (int t = first; t < first + layout.tiles_per_page; ++t) layout.tiles[t].visible = (t == tile);
  layout.tiles[tile].geometry = {0, 0, canvas.width, canvas.height};
  layout.maximized = tile;
}

void restore(LayoutState& layout) {
  if (!layout.maximized) throw StateError("nothing is maximized");
  const int first = layout.page_index * layout.tiles_per_page;
  for (int t = first; t < first + layout.tiles_per_page; ++t) layout.tiles[t].visible = true;
  Tile& tile = layout.tiles[*layout.maximized];
  tile.geometry = tile.home;
  layout.maximized.reset();
}

void page_next(LayoutState& layout) {
  if (layout.maximized) throw StateError("paging is disabled while a tile is maximized");
  layout.page_index = std::min(layout.page_index + 1, layout.page_count() - 1);
}

void page_prev(LayoutState& layout) {
  if (layout.maximized) throw StateError("paging is disabled while a tile is maximized");
  layout.page_index = std::max(layout.page_index - 1, 0);
}

void scale_into(const Frame& src, Frame& dst, const TileGeometry& rect) {
  check_rect(src, dst, rect);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < rect.height; ++y) scale_rows(src, dst, rect, y, y + 1);
}

namespace reference {
void scale_into(const Frame& src, Frame& dst, const TileGeometry& rect) {
  check_rect(src, dst, rect);
  scale_rows(src, dst, rect, 0, rect.height);
}
}  // namespace reference

Compositor::Compositor(CanvasConfig canvas, std::vector<std::unique_ptr<Source>> sources)
    : canvas_(canvas), sources_(std::move(sources)), target_(canvas.width, canvas.height, kBackground) {
  canvas_.validate();
  rebuild_layout();
}

void Compositor::rebuild_layout() {
  std::vector<SourceDescriptor> descs;
  descs.reserve(sources_.size());
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    SourceDescriptor d = sources_[i]->descriptor();
    d.id = static_cast<int>(i);
    descs.push_back(std::move(d));
  }
  LayoutState next = assign_sources(descs, canvas_);
  next.page_index = std::min(layout_.page_index, next.page_count() - 1);
  if (layout_.maximized && *layout_.maximized < static_cast<int>(next.tiles.size()))
    tilecast::maximize(next, *layout_.maximized, canvas_);
  layout_ = std::move(next);
}

void Compositor::maximize(int tile) { tilecast::maximize(layout_, tile, canvas_); }
void Compositor::restore() { tilecast::restore(layout_); }
void Compositor::page_next() { tilecast::page_next(layout_); }
void Compositor::page_prev() { tilecast::page_prev(layout_); }

void Compositor::toggle(int tile) {
  if (layout_.maximized)
    restore();
  else
    maximize(tile);
}

void Compositor::add_source(std::unique_ptr<Source> source) {
  sources_.push_back(std::move(source));
  rebuild_layout();
}

const Frame& Compositor::compose_tick(std::uint64_t tick, std::uint64_t now_us) {
  std::fill(target_.rgb.begin(), target_.rgb.end(), kBackground.r);
  std::vector<bool> sampled(sources_.size(), false);
  std::size_t calls = 0;
  const int first = layout_.page_index * layout_.tiles_per_page;
  for (int t = first; t < first + layout_.tiles_per_page; ++t) {
    const Tile& tile = layout_.tiles[t];
    if (!tile.visible || !tile.source_id) continue;
    const auto id = static_cast<std::size_t>(*tile.source_id);
    std::optional<Frame> frame = sources_[id]->next_frame(tick);
    sampled[id] = true;
    ++calls;
    if (frame)
      scale_into(*frame, target_, tile.geometry);
    else
      target_.fill_rect(tile.geometry.x, tile.geometry.y, tile.geometry.width, tile.geometry.height, {0, 0, 0});
  }
  if (canvas_.sample_hidden_pages) {
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      if (sampled[i]) continue;
      (void)sources_[i]->next_frame(tick);
      ++calls;
    }
  }
  if (has_strip_room(target_.width, target_.height)) stamp_timestamp(target_, now_us);
  target_.capture_ts_us = now_us;
  target_.source_id = -1;
  sampled_last_tick_ = calls;
  composed_ = true;
  return target_;
}

Frame Compositor::snapshot() const {
  if (!composed_) throw StateError("no frame has been composed yet");
  return target_;
}

std::future<CommandOutcome> DirectorChannel::submit(DirectorCommand cmd) {
  std::promise<CommandOutcome> promise;
  auto future = promise.get_future();
  std::lock_guard lock(mutex_);
  queue_.emplace_back(std::move(cmd), std::move(promise));
  return future;
}

void DirectorChannel::drain(Compositor& compositor) {
  std::deque<std::pair<DirectorCommand, std::promise<CommandOutcome>>> pending;
  {
    std::lock_guard lock(mutex_);
    pending.swap(queue_);
  }
  for (auto& [cmd, promise] : pending) {
    CommandOutcome outcome;
    try {
      std::visit(
          [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, MaximizeCmd>) compositor.maximize(c.tile);
            else if constexpr (std::is_same_v<T, RestoreCmd>) compositor.restore();
            else if constexpr (std::is_same_v<T, ToggleCmd>) compositor.toggle(c.tile);
            else if constexpr (std::is_same_v<T, PageNextCmd>) compositor.page_next();
            else compositor.page_prev();
          },
          cmd);
    } catch (const StateError& e) {
      outcome.ok = false;
      outcome.error = e.what();
    }
    outcome.layout = compositor.layout();
    promise.set_value(std::move(outcome));
  }
}

void DirectorChannel::cancel_all(const std::string& reason) {
  std::lock_guard lock(mutex_);
  for (auto& [cmd, promise] : queue_) {
    CommandOutcome outcome;
    outcome.ok = false;
    outcome.error = reason;
    promise.set_value(std::move(outcome));
  }
  queue_.clear();
}

}  // namespace tilecast
