"""Bundled 12-task toy benchmark: four sites, three tasks each.

Every site has one missing feature (a trap) that exactly one of its tasks
walks into, and one shortcut advertised on its home page.
"""

from __future__ import annotations

from .core import Task
from .harness import EnvTask, Shortcut, ToyEnvironment, Trap

_SITES = {
    "shopping": {
        "start_url": "SHOP",
        "transitions": {
            ("shop/home", "search"): "shop/results",
            ("shop/results", "open product"): "shop/product",
            ("shop/results", "sort by rating"): "shop/rated_results",
            ("shop/rated_results", "open first result"): "shop/top_product",
            ("shop/product", "open reviews"): "shop/reviews",
            ("shop/home", "account"): "shop/account",
            ("shop/account", "my orders"): "shop/orders",
            ("shop/orders", "open latest order"): "shop/order_detail",
        },
        "trap": Trap("shop/results", "filter by rating", "shop/rated_results",
                     "there is no rating filter on the search results page", ("sort by rating",)),
        "shortcut": Shortcut("shop/home", "search order number", "shop/order_detail",
                             "the search bar accepts order numbers"),
        "tasks": [
            ("shopping_001", "Find the highest rated ceramic coffee mug", "shop/top_product",
             ("search", "filter by rating", "open first result")),
            ("shopping_002", "Show the customer reviews for the blue electric kettle", "shop/reviews",
             ("search", "open product", "open reviews")),
            ("shopping_003", "What is the status of my most recent order?", "shop/order_detail",
             ("account", "my orders", "open latest order")),
        ],
    },
    "map": {
        "start_url": "MAP",
        "transitions": {
            ("map/home", "search location"): "map/place",
            ("map/place", "directions"): "map/route_form",
            ("map/place", "show neighbors"): "map/neighbors",
            ("map/route_form", "get route"): "map/driving_route",
            ("map/route_form", "click the walking icon"): "map/walking_route",
        },
        "trap": Trap("map/route_form", "choose walking in the mode menu", "map/walking_route",
                     "there is no travel mode menu", ("click the walking icon",)),
        "shortcut": Shortcut("map/home", "type the route into the search box", "map/route_form",
                             "routes can be typed directly into the search box"),
        "tasks": [
            ("map_001", "Get walking directions from CMU to the Pittsburgh Zoo", "map/walking_route",
             ("search location", "directions", "choose walking in the mode menu")),
            ("map_002", "Which US states border Illinois?", "map/neighbors",
             ("search location", "show neighbors")),
            ("map_003", "Get driving directions from the airport to downtown Pittsburgh", "map/driving_route",
             ("search location", "directions", "get route")),
        ],
    },
    "gitlab": {
        "start_url": "GITLAB",
        "transitions": {
            ("git/home", "projects"): "git/project_list",
            ("git/project_list", "open project"): "git/project",
            ("git/project", "issues"): "git/issues",
            ("git/project", "merge requests"): "git/mr_list",
            ("git/issues", "open issue"): "git/issue",
            ("git/issues", "search assignee:@me"): "git/my_issues",
            ("git/issue", "close issue"): "git/closed_issue",
        },
        "trap": Trap("git/issues", "filter by assignee", "git/my_issues",
                     "the issue list has no assignee filter", ("search assignee:@me",)),
        "shortcut": Shortcut("git/home", "open project by URL", "git/project",
                             "projects can be opened directly by URL"),
        "tasks": [
            ("gitlab_001", "List the open issues assigned to me in the a11y project", "git/my_issues",
             ("projects", "open project", "issues", "filter by assignee")),
            ("gitlab_002", "Close the issue about the broken login page in the a11y project", "git/closed_issue",
             ("projects", "open project", "issues", "open issue", "close issue")),
            ("gitlab_003", "Show the open merge requests of the a11y project", "git/mr_list",
             ("projects", "open project", "merge requests")),
        ],
    },
    "reddit": {
        "start_url": "REDDIT",
        "transitions": {
            ("reddit/home", "forums"): "reddit/forum_list",
            ("reddit/forum_list", "open forum"): "reddit/forum",
            ("reddit/forum", "open post"): "reddit/post",
            ("reddit/forum", "append sort=top to the URL"): "reddit/top_posts",
            ("reddit/post", "reply"): "reddit/reply_form",
            ("reddit/home", "user profile"): "reddit/profile",
        },
        "trap": Trap("reddit/forum", "sort by top", "reddit/top_posts",
                     "the forum page has no sort-by-top button", ("append sort=top to the URL",)),
        "shortcut": Shortcut("reddit/home", "type the forum name in search", "reddit/forum",
                             "forum names can be typed into the search box"),
        "tasks": [
            ("reddit_001", "Find the top post of all time in the books forum", "reddit/top_posts",
             ("forums", "open forum", "sort by top")),
            ("reddit_002", "Reply to the latest post in the books forum", "reddit/reply_form",
             ("forums", "open forum", "open post", "reply")),
            ("reddit_003", "Check the karma on my user profile", "reddit/profile",
             ("user profile",)),
        ],
    },
}


def fixture_environment(max_steps: int = 15) -> ToyEnvironment:
    transitions, traps, shortcuts, tasks = {}, [], [], []
    for site, spec in _SITES.items():
        transitions.update(spec["transitions"])
        traps.append(spec["trap"])
        shortcuts.append(spec["shortcut"])
        start = spec["shortcut"].page
        for task_id, intent, goal, plan in spec["tasks"]:
            task = Task(task_id, site, spec["start_url"], intent)
            tasks.append(EnvTask(task, start, goal, plan))
    return ToyEnvironment(transitions, tasks, traps=traps, shortcuts=shortcuts, max_steps=max_steps)


def fixture_tasks() -> list[Task]:
    env = fixture_environment()
    return [env.tasks[tid].task for tid in sorted(env.tasks)]
