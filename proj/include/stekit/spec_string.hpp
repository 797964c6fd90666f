#pragma once

#include <cctype>
#include <cstddef>
#include <string>

#include "stekit/error.hpp"
#include "stekit/ste.hpp"

namespace stekit {

/// Stack notation: layers as "(t_u:t_o)" joined by "-", an optional placement
/// suffix "@before|@after|@both", and an optional stack-wide window/stride
/// override " w=W,s=S". Defaults are t_w=2, t_s=1 and @before. Examples:
///   "(2:1)-(2:1)"         two halving layers
///   "(4:3)@after w=4,s=2" one layer in semantic space with a wide window
inline StackSpec parse_stack(const std::string& text) {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) -> void {
    throw parse_error("spec parse error at position " + std::to_string(pos) +
                          ": " + what,
                      pos);
  };
  const auto peek = [&]() -> char {
    return pos < text.size() ? text[pos] : '\0';
  };
  const auto expect = [&](char c) {
    if (peek() != c)
      fail(std::string("expected '") + c + "'" +
           (pos < text.size() ? std::string(", found '") + text[pos] + "'"
                              : std::string(", found end of input")));
    ++pos;
  };
  const auto read_int = [&]() -> int {
    if (!std::isdigit(static_cast<unsigned char>(peek())))
      fail("expected a positive integer");
    long v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (text[pos] - '0');
      if (v > 1'000'000) fail("integer too large");
      ++pos;
    }
    if (v == 0) fail("value must be positive");
    return int(v);
  };

  StackSpec stack;
  while (true) {
    expect('(');
    LayerSpec layer;
    layer.t_u = read_int();
    expect(':');
    layer.t_o = read_int();
    expect(')');
    stack.layers.push_back(layer);
    if (peek() == '-') {
      ++pos;
      continue;
    }
    break;
  }

  if (peek() == '@') {
    ++pos;
    const std::size_t word_pos = pos;
    std::string word;
    while (std::isalpha(static_cast<unsigned char>(peek()))) word += text[pos++];
    if (word == "before")
      stack.insertion = Insertion::before_projector;
    else if (word == "after")
      stack.insertion = Insertion::after_projector;
    else if (word == "both")
      stack.insertion = Insertion::both;
    else {
      pos = word_pos;
      fail("expected before, after or both");
    }
  }

  if (peek() == ' ') {
    ++pos;
    expect('w');
    expect('=');
    const int w = read_int();
    expect(',');
    expect('s');
    expect('=');
    const int s = read_int();
    for (LayerSpec& layer : stack.layers) {
      layer.t_w = w;
      layer.t_s = s;
    }
  }

  if (pos != text.size()) fail("unexpected trailing input");
  return stack;
}

/// Canonical text form; parse_stack(format_stack(x)) == x, and
/// format_stack(parse_stack(s)) == s for canonical s.
inline std::string format_stack(const StackSpec& stack) {
  std::string out;
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const LayerSpec& l = stack.layers[i];
    if (i) out += '-';
    out += "(" + std::to_string(l.t_u) + ":" + std::to_string(l.t_o) + ")";
  }
  if (stack.insertion == Insertion::after_projector) out += "@after";
  if (stack.insertion == Insertion::both) out += "@both";
  if (!stack.layers.empty() &&
      (stack.layers[0].t_w != 2 || stack.layers[0].t_s != 1))
    out += " w=" + std::to_string(stack.layers[0].t_w) +
           ",s=" + std::to_string(stack.layers[0].t_s);
  return out;
}

inline std::string insertion_name(Insertion ins) {
  switch (ins) {
    case Insertion::before_projector: return "before";
    case Insertion::after_projector: return "after";
    case Insertion::both: return "both";
  }
  return "before";
}

}  // namespace stekit
