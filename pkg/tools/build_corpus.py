"""Regenerates the bundled benchmark programs under src/blockgen/programs/."""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "blockgen" / "programs"

def V(n): return {"op": "variable", "args": {"name": n}}
def op(o, **a): return {"op": o, "args": a}
def B(o, id=None, children=None, **a):
    d = {"op": o, "args": a}
    if id: d["id"] = id
    if children is not None: d["children"] = children
    return d
def hat(event, id, **p): return dict(event=event, id=id, **p)
def pick(a, b): return op("pickRandom", **{"from": a, "to": b})
def touching(s): return op("touchingSprite", sprite=s)
def key(k): return op("keyDown", key=k)
X = op("xPosition"); Y = op("yPosition"); D = op("direction")
def sprite(name, x, y, w, h, scripts, visible=True, direction=90):
    return dict(name=name, x=x, y=y, width=w, height=h, visible=visible, direction=direction,
                scripts=scripts, procedures={})
def script(h, *body): return {"hat": h, "body": list(body)}
def countdown(prefix, start, tick, over):
    return [B("setVariable", f"{prefix}_time", variable="time", value=start),
            B("repeatUntil", f"{prefix}_loop", [[
                B("wait", f"{prefix}_tick", duration=tick),
                B("changeVariableBy", f"{prefix}_dec", variable="time", value=-tick)]],
              condition=op("<", a=V("time"), b=1)),
            over]

pingpong = {
  "name": "pingpong",
  "stage": {"name": "Stage", "scripts": [script(hat("greenFlag", "match_flag"),
      *countdown("match", 15, 5, B("stopAll", "match_over")))]},
  "sprites": [
    sprite("ball", 0, 0, 16, 16, direction=45, scripts=[script(hat("greenFlag", "ball_flag"),
        B("setVariable", "ball_init_left", variable="left_score", value=0),
        B("setVariable", "ball_init_right", variable="right_score", value=0),
        B("waitUntil", "ball_serve", condition=key("space")),
        B("forever", "ball_loop", [[
            B("moveSteps", "ball_move", steps=16),
            B("ifOnEdgeBounce", "ball_bounce"),
            B("setVariable", "ball_track", variable="ball_y", value=Y),
            B("ifElse", "ball_in_play", [[
                B("if", "ball_player_hit", [[
                    B("changeVariableBy", "ball_rally", variable="hits", value=1)]],
                  condition=touching("left_paddle")),
                B("if", "ball_hit", [[
                    B("pointInDirection", "ball_return", direction=op("-", a=0, b=D)),
                    B("moveSteps", "ball_clear", steps=16)]],
                  condition=op("or",
                    a=op("and", a=touching("right_paddle"), b=op(">", a=D, b=0)),
                    b=op("and", a=touching("left_paddle"), b=op("<", a=D, b=0)))),
            ], [
                B("ifElse", "ball_missed_side", [
                    [B("changeVariableBy", "ball_point_left", variable="left_score", value=1)],
                    [B("changeVariableBy", "ball_point_right", variable="right_score", value=1)]],
                  condition=op(">", a=X, b=0)),
                B("goToXY", "ball_reset", x=0, y=0),
                B("pointInDirection", "ball_reserve", direction=op("-", a=0, b=D)),
                B("wait", "ball_pause", duration=1),
            ]], condition=op("and", a=op("<", a=X, b=225), b=op(">", a=X, b=-225))),
        ]]))]),
    sprite("left_paddle", -210, 0, 16, 100, [script(hat("greenFlag", "player_flag"),
        B("forever", "player_loop", [[
            B("if", "player_if_up", [[B("changeYBy", "player_up", dy=12)]],
              condition=op("or", a=key("w"), b=key("up arrow"))),
            B("if", "player_if_down", [[B("changeYBy", "player_down", dy=-12)]],
              condition=op("or", a=key("s"), b=key("down arrow"))),
        ]]))]),
    sprite("right_paddle", 210, 0, 16, 60, [script(hat("greenFlag", "cpu_flag"),
        B("goToXY", "cpu_home", x=210, y=0),
        B("forever", "cpu_loop", [[
            B("changeYBy", "cpu_follow", dy=op("/", a=op("-", a=V("ball_y"), b=Y), b=12)),
        ]]))]),
  ],
  "variables": {"left_score": 0, "right_score": 0, "hits": 0, "ball_y": 0, "time": 15},
}

def fruit_sprite(name, speed, delay, w, body_catch, body_miss):
    n = name
    return sprite(name, 0, 170, w, w, [script(hat("greenFlag", f"{n}_flag"),
        B("hide", f"{n}_hide"),
        B("goToXY", f"{n}_start", x=pick(-200, 200), y=170),
        B("wait", f"{n}_delay", duration=delay),
        B("show", f"{n}_show"),
        B("forever", f"{n}_loop", [[
            B("changeYBy", f"{n}_fall", dy=-speed),
            B("if", f"{n}_caught", [body_catch], condition=touching("bowl")),
            B("if", f"{n}_dropped", [body_miss], condition=op("<", a=Y, b=-165)),
        ]]))])

fruit = {
  "name": "fruit",
  "stage": {"name": "Stage", "scripts": [script(hat("greenFlag", "timer_flag"),
      B("setVariable", "timer_score", variable="score", value=0),
      *countdown("timer", 15, 5, B("stopAll", "timer_over")))]},
  "sprites": [
    sprite("bowl", 0, -150, 120, 30, [script(hat("greenFlag", "bowl_flag"),
        B("goToXY", "bowl_home", x=0, y=-150),
        B("forever", "bowl_loop", [[
            B("if", "bowl_if_left", [[B("changeXBy", "bowl_left", dx=-12)]], condition=key("left arrow")),
            B("if", "bowl_if_right", [[B("changeXBy", "bowl_right", dx=12)]], condition=key("right arrow")),
        ]]))]),
    fruit_sprite("apple", 8, 1, 30,
        [B("changeVariableBy", "apple_point", variable="score", value=1),
         B("hide", "apple_caught_hide"),
         B("goToXY", "apple_respawn", x=pick(-200, 200), y=170),
         B("show", "apple_caught_show")],
        [B("hide", "apple_miss_hide"),
         B("goToXY", "apple_retry", x=pick(-200, 200), y=170),
         B("show", "apple_miss_show")]),
    fruit_sprite("banana", 10, 2, 30,
        [B("changeVariableBy", "banana_point", variable="score", value=3),
         B("sayForSecs", "banana_yummy", message="Yummy", secs=1),
         B("hide", "banana_caught_hide"),
         B("goToXY", "banana_respawn", x=pick(-200, 200), y=170),
         B("show", "banana_caught_show")],
        [B("ifElse", "banana_penalty", [
            [B("changeVariableBy", "banana_lose", variable="score", value=-1)],
            [B("setVariable", "banana_zero", variable="score", value=0)]],
           condition=op(">", a=V("score"), b=0)),
         B("goToXY", "banana_retry", x=pick(-200, 200), y=170),
         B("wait", "banana_pause", duration=1)]),
  ],
  "variables": {"score": 0, "time": 15},
}

def flower(name, x):
    n = name
    return sprite(name, x, -165, 80, 60, [script(hat("greenFlag", f"{n}_flag"),
        B("goToXY", f"{n}_plant", x=x, y=-165),
        B("show", f"{n}_show"),
        B("forever", f"{n}_loop", [[
            B("if", f"{n}_bloom", [[
                B("sayForSecs", f"{n}_thanks", message="Thank you!", secs=2),
                B("changeVariableBy", f"{n}_happy", variable="happy", value=1)]],
              condition=op("and", a=touching("water"), b=op(">", a=Y, b=-150))),
            B("if", f"{n}_watered", [[
                B("changeYBy", f"{n}_grow", dy=20),
                B("wait", f"{n}_soak", duration=0.5)]],
              condition=touching("water")),
        ]]))])

green = {
  "name": "green",
  "stage": {"name": "Stage", "scripts": []},
  "sprites": [
    sprite("helicopter", -180, 150, 60, 30, [
      script(hat("greenFlag", "heli_flag"),
        B("goToXY", "heli_home", x=-180, y=150),
        B("setVariable", "heli_init_x", variable="heli_x", value=-180),
        B("forever", "heli_loop", [[
            B("moveSteps", "heli_fly", steps=10),
            B("ifOnEdgeBounce", "heli_turn"),
            B("setVariable", "heli_track", variable="heli_x", value=X),
        ]])),
      script(hat("keyPressed", "heli_space", key="space"),
        B("createCloneOf", "heli_drop", sprite="water")),
      script(hat("greenFlag", "heli_descent_flag"),
        B("repeatUntil", "heli_descent", [[
            B("wait", "heli_hover", duration=2),
            B("changeYBy", "heli_sink", dy=-40)]],
          condition=op("<", a=Y, b=-100)),
        B("sayForSecs", "heli_landed", message="Landed!", secs=5)),
    ]),
    sprite("water", 0, 140, 10, 10, [
      script(hat("greenFlag", "water_flag"), B("hide", "water_hide")),
      script(hat("startAsClone", "water_clone"),
        B("goToXY", "water_spawn", x=V("heli_x"), y=140),
        B("show", "water_show"),
        B("repeatUntil", "water_fall", [[B("changeYBy", "water_drip", dy=-10)]],
          condition=op("<", a=Y, b=-175)),
        B("deleteThisClone", "water_gone")),
    ], visible=False),
    flower("flower1", -150),
    flower("flower2", 0),
    flower("flower3", 150),
  ],
  "variables": {"happy": 0, "heli_x": -180},
}

empty = {"name": "empty", "stage": {"name": "Stage", "scripts": []}, "sprites": [], "variables": {}}
for name, doc in [("pingpong", pingpong), ("fruit", fruit), ("green", green), ("empty", empty)]:
    with open(OUT / f"{name}.json", "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
