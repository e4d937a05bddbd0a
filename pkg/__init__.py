"""mtrace package.""" #   Init
