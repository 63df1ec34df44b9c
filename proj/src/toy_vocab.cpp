#include "branchwm/codec.hpp"

#include <vector>
#include <string_view>

namespace bwm::detail {

// Words for the story-style prompt corpus; the remaining ids up to 256 are
// "tok_<id>" fillers.
extern const std::vector<std::string_view> kToyWords = {
    "Anna", "Ben", "Oscar", "Tom", "Mary", "Lucy", "Sam", "Kate", "Jack", "Emma", "Leo", "Mia",
    "Noah", "Ella", "Max", "Zoe", "Ivan", "Nina", "Paul", "Rosa", "He", "She", "They", "The", "A",
    "Then", "It", "I", "was", "had", "wanted", "decided", "tried", "to", "and", "her", "his",
    "their", "the", "a", "in", "with", "at", "after", "every", "for", "on", "no", "longer", "be",
    "out", "of", "it", "then", "she", "he", "filling", "painting", "cleaning", "building",
    "fixing", "reading", "cooking", "washing", "planting", "baking", "packing", "selling",
    "filled", "painted", "cleaned", "built", "fixed", "cooked", "washed", "planted", "baked",
    "packed", "sold", "found", "lost", "bought", "opened", "worked", "fill", "paint", "clean",
    "build", "fix", "cook", "wash", "plant", "bake", "pack", "sell", "find", "buy", "open",
    "change", "bird", "garden", "kitchen", "school", "family", "winter", "summer", "wooden",
    "little", "old", "new", "red", "blue", "green", "big", "small", "broken", "favorite", "Boy",
    "Scout", "Troop", "feeders.", "house.", "car.", "fence.", "boat.", "cake.", "bread.",
    "garden.", "room.", "window.", "door.", "bike.", "shoes.", "books.", "float.", "dog.", "cat.",
    "table.", "shirt.", "letter.", "store.", "lunch.", "roof.", "yard.", "toys.", "plants.",
    "box.", "kite.", "shelf.", "wall.", "shape.", "body.", "weeks.", "morning.", "day.", "night.",
    "again.", "weeks", "mother", "father", "friend", "sister", "brother", "neighbor", "am",
    "model", "B", "from", "owner", "A!",
};

} // namespace bwm::detail
