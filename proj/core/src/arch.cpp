#include "yftag/arch.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "yftag/error.hpp"

namespace yftag {

void HeadConfig::validate() const {
  if (spp_levels.empty()) throw Error("head: spp_levels is empty");
  for (int level : spp_levels) {
    if (level < 1) throw Error("head: spp level must be >= 1");
  }
  for (int width : hidden_fc_widths) {
    if (width < 1) throw Error("head: hidden fc width must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error("head: dropout_rate must be in [0, 1)");
  }
  if (num_classes < 2) throw Error("head: num_classes must be >= 2");
}

int HeadConfig::spp_bins() const {
  int bins = 0;
  for (int level : spp_levels) bins += level * level;
  return bins;
}

namespace arch {
namespace {

class Parser {
 public:
  explicit Parser(std::string_view text, std::size_t base = 0)
      : text_(text), base_(base) {}

  std::vector<Stage> stages() {
    std::vector<Stage> out;
    out.push_back(stage());
    while (accept(';')) out.push_back(stage());
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return out;
  }

 private:
  Stage stage() {
    Stage out;
    out.push_back(block());
    while (accept('+')) out.push_back(block());
    return out;
  }

  Block block() {
    skip_ws();
    if (peek() == '(') return conv();
    if (std::isdigit(static_cast<unsigned char>(peek()))) return pool();
    fail("expected '(' or pooling window");
  }

  ConvBlock conv() {
    expect('(');
    ConvBlock block;
    std::size_t filter_at = here();
    int first = integer();
    if (accept_x()) {
      FactoredFilter f;
      f.first_h = first;
      f.first_w = integer();
      expect('+');
      f.second_h = integer();
      if (!accept_x()) fail("expected 'x' in factored filter");
      f.second_w = integer();
      if (f.first_h == 0 || f.first_w == 0 || f.second_h == 0 ||
          f.second_w == 0) {
        throw ParseError("zero filter size", filter_at);
      }
      block.filter = f;
    } else {
      if (first == 0) throw ParseError("zero filter size", filter_at);
      block.filter = SquareFilter{first};
    }
    expect(',');
    std::size_t channels_at = here();
    block.channels = integer();
    if (block.channels == 0) throw ParseError("zero channels", channels_at);
    expect(')');
    if (accept('/')) block.stride = positive("stride");
    if (accept_x()) block.repeat = positive("repeat");
    return block;
  }

  PoolBlock pool() {
    PoolBlock block;
    block.window = positive("pool window");
    expect('/');
    block.stride = positive("pool stride");
    return block;
  }

  int positive(const char* what) {
    std::size_t at = here();
    int v = integer();
    if (v == 0) throw ParseError(std::string("zero ") + what, at);
    return v;
  }

  int integer() {
    skip_ws();
    if (!std::isdigit(static_cast<unsigned char>(peek()))) {
      fail("expected integer");
    }
    long long v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > std::numeric_limits<int>::max()) fail("integer too large");
      ++pos_;
    }
    return static_cast<int>(v);
  }

  // 'x' or the UTF-8 multiplication sign.
  bool accept_x() {
    skip_ws();
    if (peek() == 'x') {
      ++pos_;
      return true;
    }
    if (text_.substr(pos_, 2) == "\xC3\x97") {
      pos_ += 2;
      return true;
    }
    return false;
  }

  bool accept(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  std::size_t here() {
    skip_ws();
    return base_ + pos_;
  }

  [[noreturn]] void fail(const std::string& what) {
    throw ParseError("syntax error: " + what, base_ + pos_);
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

void render_block(std::ostringstream& out, const Block& block) {
  if (const auto* pool = std::get_if<PoolBlock>(&block)) {
    out << pool->window << '/' << pool->stride;
    return;
  }
  const auto& conv = std::get<ConvBlock>(block);
  out << '(';
  if (const auto* sq = std::get_if<SquareFilter>(&conv.filter)) {
    out << sq->size;
  } else {
    const auto& f = std::get<FactoredFilter>(conv.filter);
    out << f.first_h << 'x' << f.first_w << '+' << f.second_h << 'x'
        << f.second_w;
  }
  out << ',' << conv.channels << ')';
  if (conv.stride != 1) out << '/' << conv.stride;
  if (conv.repeat != 1) out << 'x' << conv.repeat;
}

}  // namespace

ArchSpec parse_arch(std::string_view name, std::string_view text) {
  ArchSpec spec;
  spec.name = std::string(trim(name));
  spec.stages = Parser(text).stages();
  validate(spec);
  return spec;
}

ArchSpec parse_arch_file(std::string_view contents) {
  auto colon = contents.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("missing ':' after architecture name", 0);
  }
  std::string_view name = trim(contents.substr(0, colon));
  if (name.empty()) throw ParseError("empty architecture name", 0);
  ArchSpec spec;
  spec.name = std::string(name);
  spec.stages = Parser(contents.substr(colon + 1), colon + 1).stages();
  validate(spec);
  return spec;
}

ArchSpec load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read architecture file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_arch_file(buf.str());
}

std::string render_arch(const ArchSpec& spec) {
  std::ostringstream out;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    if (s) out << "; ";
    const Stage& stage = spec.stages[s];
    for (std::size_t b = 0; b < stage.size(); ++b) {
      if (b) out << '+';
      render_block(out, stage[b]);
    }
  }
  return out.str();
}

std::string render_arch_file(const ArchSpec& spec) {
  return spec.name + ": " + render_arch(spec) + "\n";
}

void validate(const ArchSpec& spec) {
  if (spec.stages.empty()) throw ParseError("architecture has no stages", 0);
  for (const Stage& stage : spec.stages) {
    if (stage.empty()) throw ParseError("empty stage", 0);
    for (const Block& block : stage) {
      if (const auto* conv = std::get_if<ConvBlock>(&block)) {
        if (conv->channels < 1 || conv->stride < 1 || conv->repeat < 1) {
          throw ParseError("conv block fields must be positive", 0);
        }
        if (const auto* sq = std::get_if<SquareFilter>(&conv->filter)) {
          if (sq->size < 1) throw ParseError("zero filter size", 0);
        } else {
          const auto& f = std::get<FactoredFilter>(conv->filter);
          if (f.first_h < 1 || f.first_w < 1 || f.second_h < 1 ||
              f.second_w < 1) {
            throw ParseError("zero filter size", 0);
          }
        }
      } else {
        const auto& pool = std::get<PoolBlock>(block);
        if (pool.window < 1 || pool.stride < 1) {
          throw ParseError("pool block fields must be positive", 0);
        }
      }
    }
  }
  if (!std::holds_alternative<ConvBlock>(spec.stages.front().front())) {
    throw ParseError("first block must be a convolution", 0);
  }
}

int conv_layer_count(const ConvBlock& block) {
  int per = std::holds_alternative<FactoredFilter>(block.filter) ? 2 : 1;
  return per * block.repeat;
}

Geometry parse_geometry(std::string_view text) {
  Geometry g;
  int* fields[3] = {&g.height, &g.width, &g.channels};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    if (i > 0) {
      if (pos >= text.size() || (text[pos] != 'x' && text[pos] != 'X')) {
        throw ParseError("geometry must look like HxWxC", pos);
      }
      ++pos;
    }
    std::size_t start = pos;
    long long v = 0;
    while (pos < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos]))) {
      v = v * 10 + (text[pos++] - '0');
      if (v > std::numeric_limits<int>::max()) {
        throw ParseError("geometry value too large", start);
      }
    }
    if (pos == start || v == 0) {
      throw ParseError("geometry values must be positive integers", start);
    }
    *fields[i] = static_cast<int>(v);
  }
  if (pos != text.size()) throw ParseError("trailing characters", pos);
  return g;
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::spp: return "spp";
    case LayerKind::fc: return "fc";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

namespace {

class Expander {
 public:
  Expander(const Geometry& input, const HeadConfig& head) {
    plan_.input = input;
    plan_.head = head;
    h_ = input.height;
    w_ = input.width;
    c_ = input.channels;
  }

  void conv(int stage, int fh, int fw, int out_ch, int stride) {
    Layer l;
    l.kind = LayerKind::conv;
    l.stage = stage;
    l.in_channels = c_;
    l.out_channels = out_ch;
    l.filter_h = fh;
    l.filter_w = fw;
    l.stride = stride;
    l.in_h = h_;
    l.in_w = w_;
    if (first_conv_) {
      l.out_h = (h_ - fh) >= 0 ? (h_ - fh) / stride + 1 : 0;
      l.out_w = (w_ - fw) >= 0 ? (w_ - fw) / stride + 1 : 0;
      first_conv_ = false;
    } else {
      l.out_h = (h_ + stride - 1) / stride;
      l.out_w = (w_ + stride - 1) / stride;
      int pad_h = std::max((l.out_h - 1) * stride + fh - h_, 0);
      int pad_w = std::max((l.out_w - 1) * stride + fw - w_, 0);
      l.padding = Padding{pad_h / 2, pad_h - pad_h / 2, pad_w / 2,
                          pad_w - pad_w / 2};
    }
    check_positive(l);
    push(l);
    norm_relu(stage);
  }

  void pool(int stage, int window, int stride) {
    Layer l;
    l.kind = LayerKind::pool;
    l.stage = stage;
    l.in_channels = l.out_channels = c_;
    l.filter_h = l.filter_w = window;
    l.stride = stride;
    l.in_h = h_;
    l.in_w = w_;
    l.out_h = h_ >= window ? (h_ - window) / stride + 1 : 0;
    l.out_w = w_ >= window ? (w_ - window) / stride + 1 : 0;
    check_positive(l);
    push(l);
  }

  void end_stage() { plan_.stage_outputs.push_back({h_, w_, c_}); }

  void head() {
    const HeadConfig& head = plan_.head;
    Layer spp;
    spp.kind = LayerKind::spp;
    spp.in_channels = c_;
    spp.out_channels = c_ * head.spp_bins();
    spp.in_h = h_;
    spp.in_w = w_;
    spp.out_h = spp.out_w = 1;
    push(spp);
    for (int width : head.hidden_fc_widths) {
      fc(width);
      norm_relu(0);
      Layer drop = same_shape(LayerKind::dropout, 0);
      drop.dropout_rate = head.dropout_rate;
      push(drop);
    }
    fc(head.num_classes);
  }

  void set_spec(const ArchSpec& spec) { plan_.spec = spec; }
  LayerPlan take() { return std::move(plan_); }

 private:
  void fc(int width) {
    Layer l;
    l.kind = LayerKind::fc;
    l.in_channels = c_;
    l.out_channels = width;
    l.in_h = l.in_w = l.out_h = l.out_w = 1;
    push(l);
  }

  void norm_relu(int stage) {
    push(same_shape(LayerKind::batchnorm, stage));
    push(same_shape(LayerKind::relu, stage));
  }

  Layer same_shape(LayerKind kind, int stage) const {
    Layer l;
    l.kind = kind;
    l.stage = stage;
    l.in_channels = l.out_channels = c_;
    l.in_h = l.out_h = h_;
    l.in_w = l.out_w = w_;
    return l;
  }

  void check_positive(const Layer& l) const {
    if (l.out_h <= 0 || l.out_w <= 0) {
      throw ShapeError("geometry collapses to zero at " +
                       std::string(to_string(l.kind)) + " layer in stage " +
                       std::to_string(l.stage) + " (input " +
                       std::to_string(l.in_h) + "x" + std::to_string(l.in_w) +
                       ")");
    }
  }

  void push(const Layer& l) {
    plan_.layers.push_back(l);
    h_ = l.out_h;
    w_ = l.out_w;
    c_ = l.out_channels;
  }

  LayerPlan plan_;
  int h_ = 0;
  int w_ = 0;
  int c_ = 0;
  bool first_conv_ = true;
};

}  // namespace

LayerPlan expand_layers(const ArchSpec& spec, const Geometry& input,
                        const HeadConfig& head) {
  validate(spec);
  head.validate();
  if (input.height < 1 || input.width < 1 || input.channels < 1) {
    throw ShapeError("input geometry must be positive");
  }
  Expander ex(input, head);
  ex.set_spec(spec);
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    int stage = static_cast<int>(s) + 1;
    for (const Block& block : spec.stages[s]) {
      if (const auto* pool = std::get_if<PoolBlock>(&block)) {
        ex.pool(stage, pool->window, pool->stride);
        continue;
      }
      const auto& conv = std::get<ConvBlock>(block);
      for (int r = 0; r < conv.repeat; ++r) {
        if (const auto* sq = std::get_if<SquareFilter>(&conv.filter)) {
          ex.conv(stage, sq->size, sq->size, conv.channels, conv.stride);
        } else {
          const auto& f = std::get<FactoredFilter>(conv.filter);
          ex.conv(stage, f.first_h, f.first_w, conv.channels, conv.stride);
          ex.conv(stage, f.second_h, f.second_w, conv.channels, 1);
        }
      }
    }
    ex.end_stage();
  }
  ex.head();
  return ex.take();
}

}  // namespace arch
}  // namespace yftag
