"""Seeded generator of short children's stories.

Stands in for a real simple-English story corpus when none is available.
Stories are stitched from templates, and several word classes are linked
on purpose (an animal lives in matching habitats, an emotion comes with a
matching expression) so that co-occurrence statistics have structure to
find.  ``richness`` scales how much of each word list is used and how many
procedurally generated names exist, which controls the vocabulary size.
"""

import random

ANIMALS = {
    "fish": (["pond", "lake", "water", "river", "sea"], ["swim", "splash", "dive"]),
    "bird": (["tree", "sky", "nest", "branch"], ["fly", "sing", "flap"]),
    "cat": (["house", "garden", "sofa", "window"], ["purr", "nap", "pounce"]),
    "dog": (["yard", "park", "house", "garden"], ["bark", "run", "fetch"]),
    "frog": (["pond", "lily", "mud", "water"], ["hop", "croak", "swim"]),
    "duck": (["pond", "lake", "water", "river"], ["quack", "swim", "waddle"]),
    "bunny": (["meadow", "burrow", "garden", "field"], ["hop", "nibble", "dig"]),
    "bear": (["forest", "cave", "woods", "mountain"], ["growl", "climb", "sleep"]),
    "fox": (["forest", "woods", "den", "field"], ["sneak", "run", "sniff"]),
    "owl": (["tree", "forest", "night", "barn"], ["hoot", "fly", "watch"]),
    "whale": (["sea", "ocean", "water", "waves"], ["swim", "sing", "dive"]),
    "bee": (["hive", "flower", "garden", "meadow"], ["buzz", "fly", "dance"]),
    "horse": (["farm", "barn", "field", "meadow"], ["gallop", "trot", "neigh"]),
    "cow": (["farm", "barn", "field", "grass"], ["moo", "chew", "walk"]),
    "pig": (["farm", "mud", "barn", "pen"], ["oink", "roll", "eat"]),
    "monkey": (["jungle", "tree", "vine", "branch"], ["swing", "climb", "jump"]),
    "lion": (["jungle", "savanna", "grass", "rock"], ["roar", "run", "nap"]),
    "turtle": (["pond", "beach", "sand", "water"], ["crawl", "swim", "hide"]),
    "squirrel": (["tree", "park", "branch", "nest"], ["climb", "jump", "dig"]),
    "mouse": (["house", "hole", "barn", "kitchen"], ["squeak", "nibble", "hide"]),
    "penguin": (["ice", "snow", "sea", "water"], ["slide", "swim", "waddle"]),
    "crab": (["beach", "sand", "sea", "rock"], ["pinch", "scuttle", "dig"]),
    "sheep": (["farm", "field", "hill", "meadow"], ["baa", "graze", "walk"]),
    "butterfly": (["flower", "garden", "meadow", "sky"], ["flutter", "fly", "rest"]),
    "dragon": (["castle", "mountain", "cave", "sky"], ["fly", "roar", "breathe"]),
    "snail": (["leaf", "garden", "rain", "mud"], ["crawl", "hide", "slide"]),
    "elephant": (["jungle", "river", "savanna", "zoo"], ["stomp", "spray", "trumpet"]),
    "giraffe": (["savanna", "zoo", "tree", "grass"], ["stretch", "eat", "walk"]),
    "ant": (["hill", "grass", "garden", "dirt"], ["carry", "march", "dig"]),
    "puppy": (["yard", "house", "park", "bed"], ["wag", "play", "bark"]),
}

EMOTIONS = {
    "happy": ["smiled", "laughed", "giggled", "grinned"],
    "sad": ["cried", "frowned", "sniffled", "sighed"],
    "angry": ["frowned", "shouted", "stomped", "huffed"],
    "scared": ["shivered", "gasped", "trembled", "hid"],
    "excited": ["jumped", "cheered", "clapped", "laughed"],
    "surprised": ["gasped", "blinked", "stared", "smiled"],
    "tired": ["yawned", "sighed", "rested", "slept"],
    "proud": ["smiled", "beamed", "cheered", "grinned"],
    "lonely": ["sighed", "cried", "waited", "wished"],
    "curious": ["looked", "peeked", "wondered", "asked"],
    "calm": ["smiled", "rested", "breathed", "sat"],
    "shy": ["blushed", "hid", "whispered", "smiled"],
    "grumpy": ["huffed", "frowned", "grumbled", "stomped"],
    "brave": ["stood", "smiled", "nodded", "stepped"],
    "silly": ["giggled", "laughed", "danced", "wiggled"],
    "kind": ["smiled", "helped", "shared", "hugged"],
}

COLORS = ["red", "blue", "green", "yellow", "pink", "purple", "orange", "white", "black",
          "brown", "gray", "gold", "silver", "shiny", "sparkly", "striped", "spotted"]

OBJECTS = [
    "ball", "truck", "car", "kite", "hat", "box", "book", "doll", "train", "boat", "cup",
    "balloon", "drum", "bike", "shoe", "sock", "coat", "scarf", "bucket", "shovel", "toy",
    "block", "crayon", "pencil", "paper", "blanket", "pillow", "lamp", "clock", "key",
    "ring", "necklace", "bag", "basket", "bowl", "spoon", "plate", "chair", "table", "bed",
    "wagon", "rope", "stick", "stone", "shell", "leaf", "flower", "seed", "apple", "cake",
    "cookie", "pie", "bread", "cheese", "carrot", "banana", "grape", "pear", "cherry",
    "candy", "sandwich", "soup", "juice", "milk", "egg", "honey", "jam", "muffin", "pizza",
    "robot", "puzzle", "whistle", "bell", "flag", "map", "sled", "umbrella", "mitten",
    "crown", "wand", "star", "button", "feather", "bone", "jar", "brush", "comb", "mirror",
    "ribbon", "bow", "trumpet", "guitar", "piano", "violin", "rocket", "plane", "tent",
    "ladder", "swing", "slide", "tower", "castle", "bridge", "fence", "gate", "door",
    "window", "picture", "card", "gift", "present", "letter", "note", "sticker", "marble",
    "top", "yo-yo", "teddy", "bear", "puppet", "mask", "cape", "helmet", "boot", "glove",
]

ADJECTIVES = [
    "little", "big", "tiny", "small", "huge", "old", "young", "new", "soft", "fluffy",
    "happy", "friendly", "gentle", "quiet", "loud", "fast", "slow", "funny", "clever",
    "brave", "kind", "sleepy", "hungry", "busy", "lazy", "curious", "cheerful", "smart",
    "tall", "short", "round", "fuzzy", "bouncy", "wobbly", "lucky", "playful", "shy",
    "silly", "strong", "wise", "careful", "noisy", "grumpy", "cute", "pretty", "nice",
]

PLACES = [
    "park", "school", "beach", "store", "library", "market", "zoo", "farm", "garden",
    "forest", "river", "lake", "hill", "mountain", "village", "town", "city", "kitchen",
    "bedroom", "playground", "street", "field", "meadow", "castle", "bakery", "shop",
    "museum", "circus", "station", "harbor", "island", "cave", "bridge", "house",
]

VERBS = [
    "play", "jump", "run", "read", "draw", "paint", "sing", "dance", "build", "bake",
    "cook", "swim", "climb", "ride", "throw", "catch", "kick", "share", "find", "hide",
    "look", "watch", "listen", "help", "clean", "wash", "fix", "make", "write", "count",
    "skip", "race", "roll", "spin", "bounce", "explore", "walk", "rest", "eat", "drink",
    "carry", "push", "pull", "open", "plant", "pick", "collect", "fold", "tie", "hug",
]

FAMILY = ["mom", "dad", "grandma", "grandpa", "sister", "brother", "friend", "teacher",
          "aunt", "uncle", "neighbor", "baby"]

REAL_NAMES = [
    "lily", "tom", "ben", "sue", "anna", "max", "mia", "sam", "lucy", "jack", "emma",
    "tim", "sara", "leo", "zoe", "amy", "bob", "kate", "joe", "molly", "jill", "dan",
    "rosie", "finn", "ella", "noah", "ruby", "oscar", "ivy", "jake", "nina", "owen",
    "grace", "alex", "daisy", "henry", "chloe", "luke", "maya", "eli", "ava", "theo",
]

TIMES = ["morning", "afternoon", "evening", "night", "day", "summer", "winter", "spring"]
WEATHER = ["sunny", "rainy", "windy", "snowy", "cloudy", "warm", "cold", "bright"]
QUOTES = [
    ["let", "'", "s", "play", "!"], ["i", "love", "you", "!"], ["thank", "you", "!"],
    ["can", "i", "help", "?"], ["look", "at", "this", "!"], ["i", "am", "sorry", "."],
    ["what", "is", "that", "?"], ["this", "is", "fun", "!"], ["come", "with", "me", "!"],
    ["do", "you", "want", "to", "play", "?"], ["we", "did", "it", "!"],
    ["i", "can", "do", "it", "!"], ["where", "are", "you", "?"], ["good", "night", "."],
]
_SYLLABLES = ["ka", "lo", "mi", "ra", "ben", "ta", "li", "no", "sa", "vi", "do", "ru",
              "pe", "zo", "ni", "ma", "fe", "go", "ha", "ju", "el", "an", "ti", "bo",
              "ce", "da", "wi", "ya", "po", "su", "ke", "lu", "me", "ro", "qui", "xa"]


def _names(rng, count):
    seen, out = set(REAL_NAMES), []
    while len(out) < count:
        n = "".join(rng.choice(_SYLLABLES) for _ in range(rng.choice((2, 2, 3))))
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out


def _take(seq, frac):
    return seq[:max(2, int(round(len(seq) * frac)))]


class StoryGenerator:
    def __init__(self, seed=0, richness=1.0, extra_names=1500):
        if richness <= 0:
            raise ValueError("richness must be > 0")
        self.rng = random.Random(seed)
        frac = min(1.0, richness)
        self.animals = _take(sorted(ANIMALS), frac)
        self.emotions = _take(sorted(EMOTIONS), frac)
        self.colors = _take(COLORS, frac)
        self.objects = _take(OBJECTS, frac)
        self.adjectives = _take(ADJECTIVES, frac)
        self.places = _take(PLACES, frac)
        self.verbs = _take(VERBS, frac)
        self.names = REAL_NAMES[:max(4, int(len(REAL_NAMES) * frac))]
        self.names = self.names + _names(random.Random(seed + 1), int(extra_names * richness))
        # Zipf-like popularity for names; the generated tail is rare
        self.name_weights = [1.0 / (r + 1) ** 1.1 for r in range(len(self.names))]

    def _name(self):
        return self.rng.choices(self.names, weights=self.name_weights)[0]

    def _sentence(self, hero, pron, animal, friend):
        r = self.rng
        home, moves = ANIMALS[animal]
        emo = r.choice(self.emotions)
        obj = r.choice(self.objects)
        kind = r.randrange(12)
        if kind == 0:
            return [hero, "lived", "in", "the", r.choice(home), "."]
        if kind == 1:
            return ["the", animal, "liked", "to", r.choice(moves), "in", "the",
                    r.choice(home), "."]
        if kind == 2:
            return [pron, "liked", "to", r.choice(self.verbs), "with", "a", r.choice(self.colors),
                    obj, "."]
        if kind == 3:
            return ["one", r.choice(TIMES), ",", hero, "saw", "a", r.choice(self.colors), obj,
                    "near", "the", r.choice(home), "."]
        if kind == 4:
            return [hero, "felt", emo, "and", r.choice(EMOTIONS[emo]), "."]
        if kind == 5:
            return [hero, "said", ",", '"'] + r.choice(QUOTES) + ['"']
        if kind == 6:
            return [hero, "had", str(r.randint(2, 12)), obj + "s", "."]
        if kind == 7:
            return [hero, "and", friend, "went", "to", "the", r.choice(self.places), "to",
                    r.choice(self.verbs), "."]
        if kind == 8:
            return ["it", "was", "a", r.choice(WEATHER), r.choice(TIMES), "."]
        if kind == 9:
            return [pron, "asked", "the", r.choice(FAMILY), "for", "a", r.choice(self.adjectives),
                    obj, "."]
        if kind == 10:
            return ["the", r.choice(self.adjectives), animal, "wanted", "to", r.choice(moves),
                    "but", pron, "was", emo, "."]
        return [friend, "was", r.choice(self.adjectives), ",", "so", hero, "gave", "the", obj,
                "to", friend, "!"]

    def story(self, min_len=80, max_len=160):
        r = self.rng
        animal = r.choice(self.animals)
        hero, friend = self._name(), self._name()
        pron = r.choice(["he", "she", "it"])
        words = ["once", "upon", "a", "time", ",", "there", "was", "a", r.choice(self.adjectives),
                 animal, "named", hero, "."]
        target = r.randint(min_len, max_len)
        while len(words) < target:
            words += self._sentence(hero, pron, animal, friend)
        words += ["the", "end", "."]
        return " ".join(words)


def generate_stories(n_docs, seed=0, richness=1.0, min_len=80, max_len=160, extra_names=1500):
    gen = StoryGenerator(seed=seed, richness=richness, extra_names=extra_names)
    return [gen.story(min_len, max_len) for _ in range(n_docs)]
